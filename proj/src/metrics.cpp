// SPDX-License-Identifier: Apache-2.0
#include "reachrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "reachrec/error.hpp"

namespace reachrec::metrics {

using nlohmann::json;

long ConfusionMatrix::total() const {
  long n = 0;
  for (const auto& row : counts)
    for (long v : row) n += v;
  return n;
}

long ConfusionMatrix::trace() const {
  long n = 0;
  for (int i = 0; i < 4; ++i) n += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const long n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

std::array<std::array<long, 2>, 2> ConfusionMatrix::binarized() const {
  // index 0 = NoR, 1 = Reach (RN, R, RF fold together)
  std::array<std::array<long, 2>, 2> b{};
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) {
      const int bt = (t == 0) ? 0 : 1;
      const int bp = (p == 0) ? 0 : 1;
      b[static_cast<std::size_t>(bt)][static_cast<std::size_t>(bp)] +=
          counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
  return b;
}

double ConfusionMatrix::binarized_accuracy() const {
  const auto b = binarized();
  const long n = b[0][0] + b[0][1] + b[1][0] + b[1][1];
  return n == 0 ? 0.0 : static_cast<double>(b[0][0] + b[1][1]) / static_cast<double>(n);
}

ConfusionMatrix confusion(const std::vector<data::FrameLabel>& predicted,
                          const std::vector<data::FrameLabel>& truth) {
  if (predicted.size() != truth.size())
    throw DataError("confusion: predicted and truth lengths differ (" +
                    std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()) + ")");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i)
    m.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])]++;
  return m;
}

BinarizedScores precision_recall(const ConfusionMatrix& m) {
  const auto b = m.binarized();
  auto pr = [&](int cls) {
    PrecisionRecall out;
    const auto c = static_cast<std::size_t>(cls);
    const long tp = b[c][c];
    const long fp = b[1 - c][c];
    const long fn = b[c][1 - c];
    if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return out;
  };
  return BinarizedScores{pr(0), pr(1)};
}

DelayReport keyframe_delay(const std::vector<std::pair<long, long>>& predicted,
                           const std::vector<std::pair<long, long>>& truth, long window) {
  struct Cand {
    long dist;
    std::size_t t, p;
  };
  std::vector<Cand> cands;
  for (std::size_t t = 0; t < truth.size(); ++t)
    for (std::size_t p = 0; p < predicted.size(); ++p) {
      const long d = std::labs(predicted[p].first - truth[t].first);
      if (d <= window) cands.push_back({d, t, p});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.t != b.t) return a.t < b.t;
    return a.p < b.p;
  });
  std::vector<bool> t_used(truth.size(), false), p_used(predicted.size(), false);
  DelayReport rep;
  for (const auto& c : cands) {
    if (t_used[c.t] || p_used[c.p]) continue;
    t_used[c.t] = true;
    p_used[c.p] = true;
    rep.matches.push_back({c.t, c.p, predicted[c.p].first - truth[c.t].first,
                           predicted[c.p].second - truth[c.t].second});
  }
  std::sort(rep.matches.begin(), rep.matches.end(),
            [](const EventMatch& a, const EventMatch& b) { return a.truth_index < b.truth_index; });
  rep.missed = static_cast<long>(truth.size()) - static_cast<long>(rep.matches.size());
  rep.spurious = static_cast<long>(predicted.size()) - static_cast<long>(rep.matches.size());
  return rep;
}

EvalReport evaluate(const nn::Model& model, double theta, const std::vector<EvalSample>& samples,
                    const events::FusionPolicy& policy) {
  if (samples.empty()) throw DataError("evaluate: empty sample set");
  EvalReport rep;
  for (const auto& sample : samples) {
    const Eigen::MatrixXd scores = nn::predict(model, sample.stream);

    std::vector<data::FrameLabel> pred_labels, truth_labels;
    for (long t = 0; t < static_cast<long>(sample.stream.size()); ++t) {
      if (!sample.stream.valid[static_cast<std::size_t>(t)]) continue;
      int arg = 0;
      scores.row(t).maxCoeff(&arg);
      pred_labels.push_back(static_cast<data::FrameLabel>(arg));
      truth_labels.push_back(sample.labels[static_cast<std::size_t>(t)]);
    }
    const ConfusionMatrix cm = confusion(pred_labels, truth_labels);
    for (int t = 0; t < 4; ++t)
      for (int p = 0; p < 4; ++p)
        rep.confusion.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] +=
            cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];

    const auto events = events::assemble_events(scores, sample.stream, theta, policy);
    std::vector<std::pair<long, long>> pred_events;
    for (const auto& ev : events) {
      const auto& fidx = sample.stream.frame_index;
      const auto on = std::find(fidx.begin(), fidx.end(), ev.onset_frame) - fidx.begin();
      const auto off = std::find(fidx.begin(), fidx.end(), ev.offset_frame) - fidx.begin();
      pred_events.emplace_back(static_cast<long>(on), static_cast<long>(off));
    }
    const DelayReport dr = keyframe_delay(pred_events, sample.truth_events);
    rep.truth_events += static_cast<long>(sample.truth_events.size());
    rep.predicted_events += static_cast<long>(pred_events.size());
    rep.matched_events += static_cast<long>(dr.matches.size());
    rep.missed_events += dr.missed;
    rep.spurious_events += dr.spurious;
    for (const auto& m : dr.matches) {
      rep.onset_delays.push_back(m.onset_delay);
      rep.offset_delays.push_back(m.offset_delay);
    }
  }
  rep.frames_evaluated = rep.confusion.total();
  rep.frame_accuracy = rep.confusion.accuracy();
  rep.binarized = precision_recall(rep.confusion);

  double sum_on = 0.0, sum_off = 0.0;
  long well_timed = 0;
  for (std::size_t i = 0; i < rep.onset_delays.size(); ++i) {
    sum_on += std::abs(static_cast<double>(rep.onset_delays[i]));
    sum_off += std::abs(static_cast<double>(rep.offset_delays[i]));
    if (std::labs(rep.onset_delays[i]) <= 2 && std::labs(rep.offset_delays[i]) <= 1) ++well_timed;
  }
  if (!rep.onset_delays.empty()) {
    rep.mean_abs_onset_delay = sum_on / static_cast<double>(rep.onset_delays.size());
    rep.mean_abs_offset_delay = sum_off / static_cast<double>(rep.offset_delays.size());
  }
  if (rep.truth_events > 0)
    rep.well_timed_fraction = static_cast<double>(well_timed) / static_cast<double>(rep.truth_events);
  return rep;
}

namespace {

json pr_to_json(const PrecisionRecall& pr) {
  json j;
  j["precision"] = pr.precision ? json(*pr.precision) : json(nullptr);
  j["recall"] = pr.recall ? json(*pr.recall) : json(nullptr);
  return j;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  j["format_version"] = 1;
  j["frame_accuracy"] = report.frame_accuracy;
  j["frames_evaluated"] = report.frames_evaluated;
  json cm = json::array();
  for (const auto& row : report.confusion.counts) cm.push_back(row);
  j["confusion"] = cm;
  const auto b = report.confusion.binarized();
  j["binarized_confusion"] = json::array({json(b[0]), json(b[1])});
  j["binarized_accuracy"] = report.confusion.binarized_accuracy();
  j["precision_recall"] = {{"nor", pr_to_json(report.binarized.nor)},
                           {"reach", pr_to_json(report.binarized.reach)}};
  j["events"] = {{"truth", report.truth_events},
                 {"predicted", report.predicted_events},
                 {"matched", report.matched_events},
                 {"missed", report.missed_events},
                 {"spurious", report.spurious_events},
                 {"onset_delays", report.onset_delays},
                 {"offset_delays", report.offset_delays},
                 {"mean_abs_onset_delay", report.mean_abs_onset_delay},
                 {"mean_abs_offset_delay", report.mean_abs_offset_delay},
                 {"well_timed_fraction", report.well_timed_fraction}};
  return j.dump(2) + "\n";
}

std::string report_table(const std::string& model_name, long n_params, const EvalReport& report) {
  std::ostringstream os;
  os << "Model        Parameters   Acc.[%]   Precision NoR/R   Recall NoR/R   Events (match/miss/spur)\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %-12ld %-9.2f %7s / %-7s %6s / %-6s %ld / %ld / %ld\n",
                model_name.c_str(), n_params, 100.0 * report.frame_accuracy,
                fmt_opt(report.binarized.nor.precision).c_str(),
                fmt_opt(report.binarized.reach.precision).c_str(),
                fmt_opt(report.binarized.nor.recall).c_str(),
                fmt_opt(report.binarized.reach.recall).c_str(), report.matched_events,
                report.missed_events, report.spurious_events);
  os << line;
  if (!report.onset_delays.empty()) {
    std::snprintf(line, sizeof(line),
                  "keyframe delay: mean |onset| %.2f frames, mean |offset| %.2f frames, "
                  "well-timed %.0f%%\n",
                  report.mean_abs_onset_delay, report.mean_abs_offset_delay,
                  100.0 * report.well_timed_fraction);
    os << line;
  }
  return os.str();
}

}  // namespace reachrec::metrics
