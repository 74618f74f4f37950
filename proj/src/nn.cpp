// SPDX-License-Identifier: Apache-2.0
#include "reachrec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "reachrec/error.hpp"
#include "reachrec/log.hpp"
#include "reachrec/rng.hpp"

namespace reachrec::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_lstm_cfg(const LstmConfig& cfg) {
  if (cfg.input_dim <= 0 || cfg.hidden_dim <= 0 || cfg.n_classes <= 0 || cfg.window <= 0)
    throw ConfigError("lstm config: all dimensions must be positive");
}

void check_mlp_cfg(const MlpConfig& cfg) {
  if (cfg.widths.size() < 2) throw ConfigError("mlp config: need at least input and output widths");
  for (int w : cfg.widths)
    if (w <= 0) throw ConfigError("mlp config: layer widths must be positive");
}

VectorXd as_input(const features::FeatureVector& fv, int dim) {
  VectorXd x(dim);
  const double raw[features::kFeatureDim] = {fv.d_norm, fv.delta_d, fv.iou};
  for (int i = 0; i < dim && i < features::kFeatureDim; ++i) x(i) = raw[i];
  return x;
}

/// MLP consumes the memoryless pair (d_norm, iou).
VectorXd mlp_input(const features::FeatureVector& fv) {
  VectorXd x(2);
  x << fv.d_norm, fv.iou;
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter counting / init

long count_params(const LstmConfig& cfg) {
  check_lstm_cfg(cfg);
  const long h = cfg.hidden_dim, in = cfg.input_dim, c = cfg.n_classes;
  return 4 * h * (h + in + 1) + h * c + c;
}

long count_params(const MlpConfig& cfg) {
  check_mlp_cfg(cfg);
  long n = 0;
  for (std::size_t l = 0; l + 1 < cfg.widths.size(); ++l)
    n += static_cast<long>(cfg.widths[l + 1]) * (cfg.widths[l] + 1);
  return n;
}

LstmParams init_params(const LstmConfig& cfg, std::uint64_t seed) {
  check_lstm_cfg(cfg);
  const int h = cfg.hidden_dim;
  const double bound = std::sqrt(1.0 / h);
  Rng rng(derive_seed(seed, 0x11));
  auto fill = [&](MatrixXd& m, int rows, int cols) {
    m.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  };
  LstmParams p;
  fill(p.w_ih, 4 * h, cfg.input_dim);
  fill(p.w_hh, 4 * h, h);
  p.b = VectorXd::Zero(4 * h);
  p.b.segment(h, h).setOnes();  // forget-gate bias
  fill(p.w_out, cfg.n_classes, h);
  p.b_out = VectorXd::Zero(cfg.n_classes);
  return p;
}

MlpParams init_params(const MlpConfig& cfg, std::uint64_t seed) {
  check_mlp_cfg(cfg);
  Rng rng(derive_seed(seed, 0x22));
  MlpParams p;
  for (std::size_t l = 0; l + 1 < cfg.widths.size(); ++l) {
    const int fan_in = cfg.widths[l];
    const int fan_out = cfg.widths[l + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    p.w.push_back(std::move(w));
    p.b.push_back(VectorXd::Zero(fan_out));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward

Eigen::VectorXd forward(const LstmConfig& cfg, const LstmParams& p,
                        const std::vector<features::FeatureVector>& window,
                        LstmState* final_state, const LstmState* initial_state) {
  check_lstm_cfg(cfg);
  const int h = cfg.hidden_dim;
  if (static_cast<int>(window.size()) != cfg.window)
    throw DataError("lstm forward: window length " + std::to_string(window.size()) +
                    " != configured " + std::to_string(cfg.window));
  if (p.w_ih.rows() != 4 * h || p.w_ih.cols() != cfg.input_dim || p.w_hh.rows() != 4 * h ||
      p.w_hh.cols() != h || p.b.size() != 4 * h || p.w_out.rows() != cfg.n_classes ||
      p.w_out.cols() != h || p.b_out.size() != cfg.n_classes)
    throw DataError("lstm forward: parameter shapes do not match config");

  VectorXd hs = initial_state ? initial_state->h : VectorXd::Zero(h);
  VectorXd cs = initial_state ? initial_state->c : VectorXd::Zero(h);
  for (const auto& fv : window) {
    const VectorXd x = as_input(fv, cfg.input_dim);
    const VectorXd z = p.w_ih * x + p.w_hh * hs + p.b;
    VectorXd i(h), f(h), g(h), o(h);
    for (int k = 0; k < h; ++k) {
      i(k) = sigmoid(z(k));
      f(k) = sigmoid(z(h + k));
      g(k) = std::tanh(z(2 * h + k));
      o(k) = sigmoid(z(3 * h + k));
    }
    cs = f.cwiseProduct(cs) + i.cwiseProduct(g);
    hs = o.cwiseProduct(cs.array().tanh().matrix());
  }
  if (final_state != nullptr) {
    final_state->h = hs;
    final_state->c = cs;
  }
  return p.w_out * hs + p.b_out;
}

Eigen::VectorXd forward(const MlpConfig& cfg, const MlpParams& p,
                        const features::FeatureVector& fv) {
  check_mlp_cfg(cfg);
  if (p.w.size() + 1 != cfg.widths.size())
    throw DataError("mlp forward: parameter shapes do not match config");
  VectorXd a = mlp_input(fv).head(cfg.widths.front());
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    a = p.w[l] * a + p.b[l];
    if (l + 1 < p.w.size()) a = a.array().tanh();
  }
  return a;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  VectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

double loss(const Eigen::VectorXd& logits, data::FrameLabel target,
            const Eigen::VectorXd& class_weights) {
  const auto t = static_cast<int>(target);
  if (t < 0 || t >= logits.size()) throw DataError("loss: target outside logit range");
  const double mx = logits.maxCoeff();
  const double logsum = std::log((logits.array() - mx).exp().sum());
  return -class_weights(t) * (logits(t) - mx - logsum);
}

// ---------------------------------------------------------------------------
// Backward

LstmParams backward(const LstmConfig& cfg, const LstmParams& p,
                    const std::vector<features::FeatureVector>& window, data::FrameLabel target,
                    const Eigen::VectorXd& class_weights, double* loss_out) {
  check_lstm_cfg(cfg);
  const int h = cfg.hidden_dim;
  const int T = cfg.window;
  if (static_cast<int>(window.size()) != T)
    throw DataError("lstm backward: window length mismatch");

  // forward pass, caching per-step activations
  std::vector<VectorXd> xs(T), is(T), fs(T), gs(T), os(T), cs(T), tanh_cs(T), h_prev(T), c_prev(T);
  VectorXd hs = VectorXd::Zero(h);
  VectorXd cell = VectorXd::Zero(h);
  for (int t = 0; t < T; ++t) {
    xs[t] = as_input(window[static_cast<std::size_t>(t)], cfg.input_dim);
    h_prev[t] = hs;
    c_prev[t] = cell;
    const VectorXd z = p.w_ih * xs[t] + p.w_hh * hs + p.b;
    is[t].resize(h);
    fs[t].resize(h);
    gs[t].resize(h);
    os[t].resize(h);
    for (int k = 0; k < h; ++k) {
      is[t](k) = sigmoid(z(k));
      fs[t](k) = sigmoid(z(h + k));
      gs[t](k) = std::tanh(z(2 * h + k));
      os[t](k) = sigmoid(z(3 * h + k));
    }
    cell = fs[t].cwiseProduct(cell) + is[t].cwiseProduct(gs[t]);
    cs[t] = cell;
    tanh_cs[t] = cell.array().tanh();
    hs = os[t].cwiseProduct(tanh_cs[t]);
  }
  const VectorXd logits = p.w_out * hs + p.b_out;
  if (loss_out != nullptr) *loss_out = loss(logits, target, class_weights);

  LstmParams g;
  g.w_ih = MatrixXd::Zero(4 * h, cfg.input_dim);
  g.w_hh = MatrixXd::Zero(4 * h, h);
  g.b = VectorXd::Zero(4 * h);

  // d loss / d logits = w[target] * (softmax - onehot)
  VectorXd dlogits = softmax(logits);
  dlogits(static_cast<int>(target)) -= 1.0;
  dlogits *= class_weights(static_cast<int>(target));

  g.w_out = dlogits * hs.transpose();
  g.b_out = dlogits;

  VectorXd dh = p.w_out.transpose() * dlogits;
  VectorXd dc = VectorXd::Zero(h);
  for (int t = T - 1; t >= 0; --t) {
    const VectorXd do_ = dh.cwiseProduct(tanh_cs[t]);
    dc += dh.cwiseProduct(os[t]).cwiseProduct(
        (1.0 - tanh_cs[t].array().square()).matrix());
    const VectorXd di = dc.cwiseProduct(gs[t]);
    const VectorXd df = dc.cwiseProduct(c_prev[t]);
    const VectorXd dg = dc.cwiseProduct(is[t]);

    VectorXd dz(4 * h);
    dz.segment(0, h) = di.cwiseProduct(is[t]).cwiseProduct((1.0 - is[t].array()).matrix());
    dz.segment(h, h) = df.cwiseProduct(fs[t]).cwiseProduct((1.0 - fs[t].array()).matrix());
    dz.segment(2 * h, h) = dg.cwiseProduct((1.0 - gs[t].array().square()).matrix());
    dz.segment(3 * h, h) = do_.cwiseProduct(os[t]).cwiseProduct((1.0 - os[t].array()).matrix());

    g.w_ih += dz * xs[t].transpose();
    g.w_hh += dz * h_prev[t].transpose();
    g.b += dz;

    dh = p.w_hh.transpose() * dz;
    dc = dc.cwiseProduct(fs[t]);
  }
  return g;
}

MlpParams backward(const MlpConfig& cfg, const MlpParams& p, const features::FeatureVector& fv,
                   data::FrameLabel target, const Eigen::VectorXd& class_weights,
                   double* loss_out) {
  check_mlp_cfg(cfg);
  const std::size_t L = p.w.size();
  std::vector<VectorXd> acts(L + 1);  // acts[0] = input, acts[L] = logits
  acts[0] = mlp_input(fv).head(cfg.widths.front());
  for (std::size_t l = 0; l < L; ++l) {
    acts[l + 1] = p.w[l] * acts[l] + p.b[l];
    if (l + 1 < L) acts[l + 1] = acts[l + 1].array().tanh();
  }
  if (loss_out != nullptr) *loss_out = loss(acts[L], target, class_weights);

  MlpParams g;
  g.w.resize(L);
  g.b.resize(L);

  VectorXd delta = softmax(acts[L]);
  delta(static_cast<int>(target)) -= 1.0;
  delta *= class_weights(static_cast<int>(target));

  for (std::size_t l = L; l-- > 0;) {
    g.w[l] = delta * acts[l].transpose();
    g.b[l] = delta;
    if (l > 0) {
      delta = p.w[l].transpose() * delta;
      delta = delta.cwiseProduct((1.0 - acts[l].array().square()).matrix());
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

std::vector<ParamBlock> param_blocks(LstmParams& p) {
  return {
      {"w_ih", p.w_ih.data(), p.w_ih.size()},   {"w_hh", p.w_hh.data(), p.w_hh.size()},
      {"b", p.b.data(), p.b.size()},            {"w_out", p.w_out.data(), p.w_out.size()},
      {"b_out", p.b_out.data(), p.b_out.size()}};
}

std::vector<ParamBlock> param_blocks(MlpParams& p) {
  std::vector<ParamBlock> out;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    out.push_back({"w" + std::to_string(l), p.w[l].data(), p.w[l].size()});
    out.push_back({"b" + std::to_string(l), p.b[l].data(), p.b[l].size()});
  }
  return out;
}

void adam_step(AdamState& state, std::vector<ParamBlock> params,
               const std::vector<ParamBlock>& grads, const TrainHyper& hyper) {
  if (params.size() != grads.size()) throw InternalError("adam_step: block count mismatch");
  if (hyper.learning_rate < 0.0 || !(hyper.beta1 > 0.0 && hyper.beta1 < 1.0) ||
      !(hyper.beta2 > 0.0 && hyper.beta2 < 1.0) || !(hyper.epsilon > 0.0))
    throw ConfigError("adam_step: invalid hyperparameters");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<std::size_t>(params[i].size), 0.0);
      state.v[i].assign(static_cast<std::size_t>(params[i].size), 0.0);
    }
  }
  const long t = ++state.t;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size)
      throw InternalError("adam_step: size mismatch in block " + params[i].name);
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::ptrdiff_t k = 0; k < params[i].size; ++k) {
      const double gk = grads[i].data[k];
      if (!std::isfinite(gk))
        throw DataError("adam_step: non-finite gradient in block '" + grads[i].name + "'");
      m[static_cast<std::size_t>(k)] =
          hyper.beta1 * m[static_cast<std::size_t>(k)] + (1.0 - hyper.beta1) * gk;
      v[static_cast<std::size_t>(k)] =
          hyper.beta2 * v[static_cast<std::size_t>(k)] + (1.0 - hyper.beta2) * gk * gk;
      const double mhat = m[static_cast<std::size_t>(k)] / bc1;
      const double vhat = v[static_cast<std::size_t>(k)] / bc2;
      params[i].data[k] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Whole-model interface

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::BabynetLstm ? "babynet-lstm" : "mlp-baseline";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "babynet-lstm" || name == "babynet") return ModelKind::BabynetLstm;
  if (name == "mlp-baseline" || name == "mlp") return ModelKind::MlpBaseline;
  throw DataError("unknown model kind '" + name + "'");
}

long Model::n_params() const {
  return kind == ModelKind::BabynetLstm ? count_params(lstm_cfg) : count_params(mlp_cfg);
}

Model make_model(ModelKind kind, std::uint64_t seed) {
  Model m;
  m.kind = kind;
  if (kind == ModelKind::BabynetLstm)
    m.lstm = init_params(m.lstm_cfg, seed);
  else
    m.mlp = init_params(m.mlp_cfg, seed);
  return m;
}

namespace {

std::vector<features::FeatureVector> window_at(const features::FeatureStream& stream, long t,
                                               int T) {
  std::vector<features::FeatureVector> w;
  w.reserve(static_cast<std::size_t>(T));
  for (long k = t - T + 1; k <= t; ++k)
    w.push_back(stream.vecs[static_cast<std::size_t>(std::max(0L, k))]);
  return w;
}

Eigen::VectorXd model_logits(const Model& model, const features::FeatureStream& stream, long t) {
  if (model.kind == ModelKind::BabynetLstm)
    return forward(model.lstm_cfg, model.lstm, window_at(stream, t, model.lstm_cfg.window));
  return forward(model.mlp_cfg, model.mlp, stream.vecs[static_cast<std::size_t>(t)]);
}

}  // namespace

Eigen::MatrixXd predict(const Model& model, const features::FeatureStream& stream) {
  if (stream.size() == 0) throw DataError("predict: empty stream");
  MatrixXd out(static_cast<long>(stream.size()), kNumClasses);
  for (long t = 0; t < static_cast<long>(stream.size()); ++t)
    out.row(t) = softmax(model_logits(model, stream, t)).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct WindowRef {
  std::size_t stream = 0;
  long t = 0;
};

VectorXd inverse_frequency_weights(const std::vector<LabeledStream>& set) {
  std::array<long, kNumClasses> counts{};
  long total = 0;
  for (const auto& ls : set)
    for (std::size_t i = 0; i < ls.stream.size(); ++i) {
      if (!ls.stream.valid[i]) continue;
      counts[static_cast<std::size_t>(ls.labels[i])]++;
      ++total;
    }
  VectorXd w(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      log::warn(std::string("class ") + data::label_name(static_cast<data::FrameLabel>(c)) +
                " absent from training data; using weight 1");
      w(c) = 1.0;
    } else {
      const double freq = static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                          static_cast<double>(total);
      w(c) = std::clamp(1.0 / (kNumClasses * freq), 0.25, 8.0);
    }
  }
  return w;
}

struct SetStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

SetStats evaluate_set(const Model& model, const std::vector<LabeledStream>& set,
                      const VectorXd& weights) {
  double total_loss = 0.0;
  long correct = 0, n = 0;
  for (const auto& ls : set) {
    for (long t = 0; t < static_cast<long>(ls.stream.size()); ++t) {
      if (!ls.stream.valid[static_cast<std::size_t>(t)]) continue;
      const VectorXd logits = model_logits(model, ls.stream, t);
      const auto target = ls.labels[static_cast<std::size_t>(t)];
      total_loss += loss(logits, target, weights);
      int arg = 0;
      logits.maxCoeff(&arg);
      correct += (arg == static_cast<int>(target)) ? 1 : 0;
      ++n;
    }
  }
  SetStats s;
  if (n > 0) {
    s.mean_loss = total_loss / static_cast<double>(n);
    s.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return s;
}

}  // namespace

namespace {

TrainResult train_model(Model proto, const std::vector<LabeledStream>& train_set,
                        const std::vector<LabeledStream>& val_set, const TrainHyper& hyper);

}  // namespace

TrainResult train(ModelKind kind, const std::vector<LabeledStream>& train_set,
                  const std::vector<LabeledStream>& val_set, const TrainHyper& hyper) {
  return train_model(make_model(kind, hyper.seed), train_set, val_set, hyper);
}

TrainResult train_lstm(const LstmConfig& cfg, const std::vector<LabeledStream>& train_set,
                       const std::vector<LabeledStream>& val_set, const TrainHyper& hyper) {
  Model proto;
  proto.kind = ModelKind::BabynetLstm;
  proto.lstm_cfg = cfg;
  proto.lstm = init_params(cfg, hyper.seed);
  return train_model(std::move(proto), train_set, val_set, hyper);
}

TrainResult train_mlp(const MlpConfig& cfg, const std::vector<LabeledStream>& train_set,
                      const std::vector<LabeledStream>& val_set, const TrainHyper& hyper) {
  Model proto;
  proto.kind = ModelKind::MlpBaseline;
  proto.mlp_cfg = cfg;
  proto.mlp = init_params(cfg, hyper.seed);
  return train_model(std::move(proto), train_set, val_set, hyper);
}

namespace {

TrainResult train_model(Model proto, const std::vector<LabeledStream>& train_set,
                        const std::vector<LabeledStream>& val_set, const TrainHyper& hyper) {
  if (train_set.empty()) throw DataError("train: empty training set");
  for (const auto& ls : train_set)
    if (ls.labels.size() != ls.stream.size())
      throw DataError("train: labels and stream lengths differ");

  const ModelKind kind = proto.kind;
  TrainResult res;
  res.model = std::move(proto);
  res.class_weights = hyper.class_weights.empty()
                          ? inverse_frequency_weights(train_set)
                          : Eigen::Map<const VectorXd>(hyper.class_weights.data(),
                                                       static_cast<long>(hyper.class_weights.size()));
  if (res.class_weights.size() != kNumClasses)
    throw ConfigError("train: class_weights must have 4 entries");

  std::vector<WindowRef> windows;
  for (std::size_t s = 0; s < train_set.size(); ++s)
    for (long t = 0; t < static_cast<long>(train_set[s].stream.size()); ++t)
      if (train_set[s].stream.valid[static_cast<std::size_t>(t)]) windows.push_back({s, t});
  if (windows.empty()) throw DataError("train: no valid training frames");

  Model work = res.model;
  AdamState adam;
  double best_val = -1.0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    Rng order_rng(derive_seed(hyper.seed, 0x1000 + static_cast<std::uint64_t>(epoch)));
    auto order = windows;
    order_rng.shuffle(order);
    for (const auto& wref : order) {
      const auto& ls = train_set[wref.stream];
      const auto target = ls.labels[static_cast<std::size_t>(wref.t)];
      if (kind == ModelKind::BabynetLstm) {
        LstmParams g = backward(work.lstm_cfg, work.lstm,
                                window_at(ls.stream, wref.t, work.lstm_cfg.window), target,
                                res.class_weights);
        adam_step(adam, param_blocks(work.lstm), param_blocks(g), hyper);
      } else {
        MlpParams g = backward(work.mlp_cfg, work.mlp,
                               ls.stream.vecs[static_cast<std::size_t>(wref.t)], target,
                               res.class_weights);
        adam_step(adam, param_blocks(work.mlp), param_blocks(g), hyper);
      }
    }

    EpochStats st;
    st.epoch = epoch;
    const SetStats tr = evaluate_set(work, train_set, res.class_weights);
    st.train_loss = tr.mean_loss;
    st.train_accuracy = tr.accuracy;
    if (!val_set.empty()) {
      const SetStats va = evaluate_set(work, val_set, res.class_weights);
      st.val_loss = va.mean_loss;
      st.val_accuracy = va.accuracy;
    } else {
      st.val_loss = tr.mean_loss;
      st.val_accuracy = tr.accuracy;
    }
    res.history.push_back(st);
    if (st.val_accuracy > best_val) {
      best_val = st.val_accuracy;
      res.best_epoch = epoch;
      res.model = work;
    }
    log::debug("epoch " + std::to_string(epoch) + ": train acc " +
               std::to_string(st.train_accuracy) + ", val acc " + std::to_string(st.val_accuracy));
  }
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixXd matrix_from_json(const json& j, long rows, long cols, const std::string& name) {
  if (!j.is_array() || static_cast<long>(j.size()) != rows)
    throw DataError("model.json: " + name + " must have " + std::to_string(rows) + " rows");
  MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<long>(row.size()) != cols)
      throw DataError("model.json: " + name + " row " + std::to_string(r) + " must have " +
                      std::to_string(cols) + " columns");
    for (long c = 0; c < cols; ++c) {
      const double v = row[static_cast<std::size_t>(c)].get<double>();
      if (!std::isfinite(v)) throw DataError("model.json: non-finite value in " + name);
      m(r, c) = v;
    }
  }
  return m;
}

VectorXd vector_from_json(const json& j, long size, const std::string& name) {
  if (!j.is_array() || static_cast<long>(j.size()) != size)
    throw DataError("model.json: " + name + " must have " + std::to_string(size) + " entries");
  VectorXd v(size);
  for (long i = 0; i < size; ++i) {
    const double x = j[static_cast<std::size_t>(i)].get<double>();
    if (!std::isfinite(x)) throw DataError("model.json: non-finite value in " + name);
    v(i) = x;
  }
  return v;
}

void check_finite(const std::vector<ParamBlock>& blocks) {
  for (const auto& b : blocks)
    for (std::ptrdiff_t k = 0; k < b.size; ++k)
      if (!std::isfinite(b.data[k]))
        throw DataError("model contains non-finite value in block '" + b.name + "'");
}

}  // namespace

std::string save_model(const Model& model) {
  json j;
  j["format_version"] = 1;
  j["kind"] = model_kind_name(model.kind);
  if (model.kind == ModelKind::BabynetLstm) {
    auto blocks = param_blocks(const_cast<LstmParams&>(model.lstm));
    check_finite(blocks);
    j["config"] = {{"input_dim", model.lstm_cfg.input_dim},
                   {"hidden_dim", model.lstm_cfg.hidden_dim},
                   {"n_classes", model.lstm_cfg.n_classes},
                   {"window", model.lstm_cfg.window}};
    j["gate_order"] = "ifgo";
    j["w_ih"] = matrix_to_json(model.lstm.w_ih);
    j["w_hh"] = matrix_to_json(model.lstm.w_hh);
    j["b"] = vector_to_json(model.lstm.b);
    j["w_out"] = matrix_to_json(model.lstm.w_out);
    j["b_out"] = vector_to_json(model.lstm.b_out);
  } else {
    auto blocks = param_blocks(const_cast<MlpParams&>(model.mlp));
    check_finite(blocks);
    j["config"] = {{"widths", model.mlp_cfg.widths}};
    json layers = json::array();
    for (std::size_t l = 0; l < model.mlp.w.size(); ++l)
      layers.push_back({{"w", matrix_to_json(model.mlp.w[l])}, {"b", vector_to_json(model.mlp.b[l])}});
    j["layers"] = layers;
  }
  return j.dump(2) + "\n";
}

Model load_model(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw DataError(std::string("model.json: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw DataError("model.json: unsupported format_version");
    Model m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    if (m.kind == ModelKind::BabynetLstm) {
      const auto& c = j.at("config");
      m.lstm_cfg.input_dim = c.at("input_dim").get<int>();
      m.lstm_cfg.hidden_dim = c.at("hidden_dim").get<int>();
      m.lstm_cfg.n_classes = c.at("n_classes").get<int>();
      m.lstm_cfg.window = c.at("window").get<int>();
      check_lstm_cfg(m.lstm_cfg);
      if (j.at("gate_order").get<std::string>() != "ifgo")
        throw DataError("model.json: unsupported gate order");
      const int h = m.lstm_cfg.hidden_dim;
      m.lstm.w_ih = matrix_from_json(j.at("w_ih"), 4 * h, m.lstm_cfg.input_dim, "w_ih");
      m.lstm.w_hh = matrix_from_json(j.at("w_hh"), 4 * h, h, "w_hh");
      m.lstm.b = vector_from_json(j.at("b"), 4 * h, "b");
      m.lstm.w_out = matrix_from_json(j.at("w_out"), m.lstm_cfg.n_classes, h, "w_out");
      m.lstm.b_out = vector_from_json(j.at("b_out"), m.lstm_cfg.n_classes, "b_out");
    } else {
      m.mlp_cfg.widths = j.at("config").at("widths").get<std::vector<int>>();
      check_mlp_cfg(m.mlp_cfg);
      const auto& layers = j.at("layers");
      if (layers.size() + 1 != m.mlp_cfg.widths.size())
        throw DataError("model.json: layer count does not match widths");
      for (std::size_t l = 0; l < layers.size(); ++l) {
        m.mlp.w.push_back(matrix_from_json(layers[l].at("w"), m.mlp_cfg.widths[l + 1],
                                           m.mlp_cfg.widths[l], "layer " + std::to_string(l)));
        m.mlp.b.push_back(vector_from_json(layers[l].at("b"), m.mlp_cfg.widths[l + 1],
                                           "layer " + std::to_string(l) + " bias"));
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model.json: ") + e.what());
  }
}

}  // namespace reachrec::nn
