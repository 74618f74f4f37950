// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reachrec/cli.hpp"
#include "reachrec/data.hpp"
#include "reachrec/error.hpp"
#include "reachrec/events.hpp"
#include "reachrec/geometry.hpp"
#include "reachrec/metrics.hpp"
#include "reachrec/nn.hpp"
#include "reachrec/rng.hpp"
#include "reachrec/synth.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace reachrec;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch_root() {
  const fs::path p = fs::temp_directory_path() / "reachrec_acceptance";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// 1. parameter identity

Outcome criterion_param_identity(const fs::path& scratch) {
  const long count = nn::count_params(nn::LstmConfig{3, 15, 4, 2});
  if (count != 1204) return {false, "count_params = " + std::to_string(count)};

#ifdef REACHREC_CLI_PATH
  // the CLI must print the count at train time
  const fs::path dir = scratch / "c1";
  cli::GenOptions gen;
  gen.n = 6;
  gen.seed = 1;
  gen.out = dir / "data";
  cli::run_gen(gen);
  const std::string bin = REACHREC_CLI_PATH;
  const std::string cmd = bin + " train --data " + (dir / "data").string() + " --out " +
                          (dir / "model").string() + " --epochs 1 > " +
                          (dir / "stdout.txt").string() + " 2>/dev/null";
  if (std::system(cmd.c_str()) != 0) return {false, "train run failed"};
  const std::string out = cli::read_file(dir / "stdout.txt");
  if (out.find("1204 trainable parameters") == std::string::npos)
    return {false, "train did not print the parameter count"};
#endif
  return {true, "count_params(3,15,4) = 1204, printed at train time"};
}

// ---------------------------------------------------------------------------
// 2. gradient correctness

Outcome criterion_gradients(const fs::path&) {
  Rng rng(20260810);
  long violations = 0;
  for (int it = 0; it < 100; ++it) violations += test_support::gradient_check_once(rng);
  return {violations == 0,
          "100 instances, " + std::to_string(violations) + " coordinate violations"};
}

// ---------------------------------------------------------------------------
// 3. state-machine oracle equivalence

Outcome criterion_state_machine(const fs::path&) {
  const double theta = 0.2;
  events::FusionPolicy rules;
  rules.mode = events::PolicyMode::RulesOnly;
  long tapes = 0;
  for (int len = 1; len <= 8; ++len) {
    long total = 1;
    for (int i = 0; i < len; ++i) total *= 6;
    for (long code = 0; code < total; ++code) {
      long c = code;
      std::vector<double> d{5.0}, iou{0.0};
      for (int i = 0; i < len; ++i) {
        const int sym = static_cast<int>(c % 6);
        c /= 6;
        const int sign = sym % 3;
        d.push_back(d.back() + (sign == 0 ? -0.01 : sign == 1 ? 0.0 : 0.01));
        iou.push_back(sym / 3 == 0 ? 0.0 : theta + 0.05);
      }
      const auto fs_ = test_support::stream_from_tapes(d, iou);
      std::vector<std::pair<long, long>> got;
      for (const auto& ev : events::assemble_events({}, fs_, theta, rules))
        got.emplace_back(ev.onset_frame, ev.offset_frame);
      if (got != test_support::reference_assemble(d, iou, theta))
        return {false, "divergence at length " + std::to_string(len) + " code " +
                           std::to_string(code)};
      ++tapes;
    }
  }
  return {true, std::to_string(tapes) + " tapes (all lengths <= 8), exact agreement"};
}

// ---------------------------------------------------------------------------
// 4. geometry properties

Outcome criterion_geometry(const fs::path&) {
  Rng rng(41);
  for (int it = 0; it < 10000; ++it) {
    const auto a = test_support::random_box(rng);
    const auto b = test_support::random_box(rng);
    const double v = geometry::iou(a, b);
    if (!(v >= 0.0 && v <= 1.0)) return {false, "iou out of bounds"};
    if (v != geometry::iou(b, a)) return {false, "asymmetric iou"};
    const double tx = rng.uniform(-500, 500), ty = rng.uniform(-500, 500);
    const geometry::BoundingBox at{a.x + tx, a.y + ty, a.w, a.h};
    const geometry::BoundingBox bt{b.x + tx, b.y + ty, b.w, b.h};
    if (std::abs(geometry::iou(at, bt) - v) > 1e-9) return {false, "translation variance"};
  }
  Rng mc_rng(42);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    auto a = test_support::random_box(mc_rng);
    auto b = test_support::random_box(mc_rng);
    b.x = a.x + mc_rng.uniform(-150.0, 150.0);
    b.y = a.y + mc_rng.uniform(-150.0, 150.0);
    const double diff =
        std::abs(geometry::iou(a, b) - test_support::iou_monte_carlo(a, b, mc_rng, 120000));
    worst = std::max(worst, diff);
    if (diff > 0.01) return {false, "Monte-Carlo deviation " + std::to_string(diff)};
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "10000 property pairs, 1000 MC pairs, worst |diff| %.4f", worst);
  return {true, buf};
}

// ---------------------------------------------------------------------------
// 5. end-to-end synthetic training

metrics::EvalReport parse_report(const fs::path& file, double* acc, double* well_timed) {
  const json r = json::parse(cli::read_file(file));
  *acc = r.at("frame_accuracy").get<double>();
  *well_timed = r.at("events").at("well_timed_fraction").get<double>();
  return {};
}

Outcome criterion_end_to_end(const fs::path& scratch) {
  const fs::path dir = scratch / "c5";
  cli::GenOptions gen;
  gen.n = 200;
  gen.seed = 7;
  gen.out = dir / "data";
  gen.config.seed = 7;
  cli::run_gen(gen);

  cli::TrainOptions train;
  train.data = dir / "data";
  train.out = dir / "model";
  train.seed = 7;
  cli::run_train(train);

  cli::EvalOptions eval;
  eval.data = dir / "data";
  eval.model_dir = dir / "model";
  eval.out = dir / "eval";
  cli::run_eval(eval);

  double acc = 0.0, well_timed = 0.0;
  parse_report(dir / "eval" / "report.json", &acc, &well_timed);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "frame accuracy %.3f (>= 0.90), well-timed events %.0f%% (>= 90%%)",
                acc, 100.0 * well_timed);
  return {acc >= 0.90 && well_timed >= 0.90, buf};
}

// ---------------------------------------------------------------------------
// 6. baseline ordering

Outcome criterion_baseline_ordering(const fs::path& scratch) {
  const fs::path dir = scratch / "c6";
  // reach frames distinguishable mostly via temporal context: long idle
  // phases whose distances overlap the approach sweep, no iou except at touch
  cli::GenOptions gen;
  gen.n = 160;
  gen.seed = 11;
  gen.out = dir / "data";
  gen.config.seed = 11;
  gen.config.n_pre_frames = {10, 28};
  gen.config.n_post_frames = {8, 18};
  gen.config.abort_probability = 0.0;
  cli::run_gen(gen);

  double acc[2] = {0.0, 0.0};
  const char* kinds[2] = {"babynet", "mlp"};
  for (int i = 0; i < 2; ++i) {
    cli::TrainOptions train;
    train.data = dir / "data";
    train.out = dir / kinds[i];
    train.model = nn::model_kind_from_name(kinds[i]);
    train.seed = 11;
    cli::run_train(train);
    cli::EvalOptions eval;
    eval.data = dir / "data";
    eval.model_dir = dir / kinds[i];
    eval.out = dir / (std::string(kinds[i]) + "_eval");
    cli::run_eval(eval);
    double well_timed = 0.0;
    parse_report(dir / (std::string(kinds[i]) + "_eval") / "report.json", &acc[i], &well_timed);
  }
  const double gap_pp = 100.0 * (acc[0] - acc[1]);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "babynet %.3f vs mlp %.3f, gap %.1f pp (>= 5)", acc[0], acc[1],
                gap_pp);
  return {gap_pp >= 5.0, buf};
}

// ---------------------------------------------------------------------------
// 7. determinism

Outcome criterion_determinism(const fs::path& scratch) {
  const fs::path base = scratch / "c5";
  const fs::path dir = scratch / "c7";
  cli::GenOptions gen;
  gen.n = 200;
  gen.seed = 7;
  gen.out = dir / "data";
  gen.config.seed = 7;
  cli::run_gen(gen);

  cli::TrainOptions train;
  train.data = dir / "data";
  train.out = dir / "model";
  train.seed = 7;
  cli::run_train(train);

  cli::EvalOptions eval;
  eval.data = dir / "data";
  eval.model_dir = dir / "model";
  eval.out = dir / "eval";
  cli::run_eval(eval);

  const bool data_same = cli::read_file(base / "data" / "detections.jsonl") ==
                         cli::read_file(dir / "data" / "detections.jsonl");
  const bool model_same = cli::read_file(base / "model" / "model.json") ==
                          cli::read_file(dir / "model" / "model.json");
  const bool report_same = cli::read_file(base / "eval" / "report.json") ==
                           cli::read_file(dir / "eval" / "report.json");
  std::string detail = std::string("dataset ") + (data_same ? "identical" : "DIFFERS") +
                       ", model.json " + (model_same ? "identical" : "DIFFERS") +
                       ", report.json " + (report_same ? "identical" : "DIFFERS");
  return {data_same && model_same && report_same, detail};
}

// ---------------------------------------------------------------------------
// 8. round trips

Outcome criterion_round_trips(const fs::path& scratch) {
  // labels <-> events on 1000 random well-formed event sets
  Rng rng(88);
  for (int it = 0; it < 1000; ++it) {
    const long n = rng.uniform_int(4, 80);
    std::vector<data::ReachEvent> events;
    long cursor = 0;
    while (true) {
      const long onset = cursor + rng.uniform_int(0, 6);
      const long offset = onset + rng.uniform_int(1, 9);
      if (offset >= n) break;
      events.push_back({data::Hand::Left, "o", onset, offset});
      cursor = offset + 1 + rng.uniform_int(0, 4);
    }
    const auto labels = data::labels_from_events(events, n, data::Hand::Left);
    const auto decoded = data::events_from_labels(labels);
    if (!decoded.warnings.empty() || decoded.events.size() != events.size())
      return {false, "labels/events inverse failed at iteration " + std::to_string(it)};
    for (std::size_t i = 0; i < events.size(); ++i)
      if (decoded.events[i].first != events[i].onset_frame ||
          decoded.events[i].second != events[i].offset_frame)
        return {false, "labels/events mismatch at iteration " + std::to_string(it)};
  }

  // model save/load bit-exactness
  for (const auto kind : {nn::ModelKind::BabynetLstm, nn::ModelKind::MlpBaseline})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const nn::Model m = nn::make_model(kind, seed);
      const std::string bytes = nn::save_model(m);
      if (nn::save_model(nn::load_model(bytes)) != bytes)
        return {false, "model save/load not bit-exact"};
    }

  // detections/annotations parse∘serialize identity on generated files
  const fs::path dir = scratch / "c8";
  cli::GenOptions gen;
  gen.n = 10;
  gen.seed = 3;
  gen.out = dir;
  cli::run_gen(gen);
  const std::string det = cli::read_file(dir / "detections.jsonl");
  const std::string ann = cli::read_file(dir / "annotations.csv");
  if (data::serialize_detections(data::parse_detections_string(det)) != det)
    return {false, "detections parse∘serialize is not the identity"};
  if (data::serialize_annotations(data::parse_annotations_string(ann)) != ann)
    return {false, "annotations parse∘serialize is not the identity"};
  return {true, "1000 event sets, 10 models, generated dataset files"};
}

// ---------------------------------------------------------------------------
// 9. threshold calibration

Outcome criterion_calibration(const fs::path&) {
  // clean validation streams: touches at iou >= 0.3, one grazing frame at
  // 0.02 mid-approach; idle anchors sit within tolerance of the onsets
  std::vector<events::CalibrationSample> samples;
  for (int i = 0; i < 10; ++i) {
    const long onset = 5 + (i % 3);
    const long duration = 8 + (i % 5);
    std::vector<double> d, iou;
    for (long k = 0; k < onset; ++k) {
      d.push_back(0.5);
      iou.push_back(0.0);
    }
    for (long k = 1; k <= duration; ++k) {
      d.push_back(0.5 - 0.4 * static_cast<double>(k) / static_cast<double>(duration + 1));
      iou.push_back(k == duration / 2 ? 0.02 : 0.0);
    }
    d.push_back(0.05);
    iou.push_back(0.3 + 0.04 * (i % 4));
    for (int k = 1; k <= 5; ++k) {
      d.push_back(0.1 + 0.06 * k);
      iou.push_back(0.0);
    }
    events::CalibrationSample s;
    s.stream = test_support::stream_from_tapes(d, iou);
    s.truth.emplace_back(onset, onset + duration);
    samples.push_back(std::move(s));
  }
  const nn::Model dummy = nn::make_model(nn::ModelKind::BabynetLstm, 0);
  const auto result = events::calibrate_threshold(dummy, samples);

  // brute-force sweep oracle over the same grid
  double oracle_theta = 0.0, oracle_f1 = -1.0;
  events::FusionPolicy rules;
  rules.mode = events::PolicyMode::RulesOnly;
  for (int k = 1; k <= 50; ++k) {
    const double theta = k / 100.0;
    std::vector<std::pair<long, long>> all_pred, all_truth;
    long base = 0;
    for (const auto& s : samples) {
      for (const auto& ev : events::assemble_events({}, s.stream, theta, rules))
        all_pred.emplace_back(ev.onset_frame + base, ev.offset_frame + base);
      for (const auto& tv : s.truth) all_truth.emplace_back(tv.first + base, tv.second + base);
      base += 1000000;
    }
    const double f1 = events::event_f1(all_pred, all_truth);
    if (f1 > oracle_f1 + 1e-12) {
      oracle_f1 = f1;
      oracle_theta = theta;
    }
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf), "theta %.2f in (0.02, 0.3], F1 %.2f, oracle theta %.2f",
                result.theta, result.event_f1, oracle_theta);
  const bool ok = result.theta > 0.02 && result.theta <= 0.3 && result.event_f1 == 1.0 &&
                  result.theta == oracle_theta && result.event_f1 == oracle_f1;
  return {ok, buf};
}

}  // namespace

int main() {
  const fs::path scratch = scratch_root();
  const std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> criteria = {
      {"parameter identity", criterion_param_identity},
      {"gradient correctness", criterion_gradients},
      {"state-machine oracle equivalence", criterion_state_machine},
      {"geometry properties", criterion_geometry},
      {"end-to-end synthetic training", criterion_end_to_end},
      {"baseline ordering", criterion_baseline_ordering},
      {"determinism", criterion_determinism},
      {"round trips", criterion_round_trips},
      {"threshold calibration", criterion_calibration},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second(scratch);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %zu. %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  fs::remove_all(scratch);
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
