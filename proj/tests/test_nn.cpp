// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "reachrec/error.hpp"
#include "reachrec/nn.hpp"
#include "reachrec/rng.hpp"
#include "support/oracles.hpp"

using namespace reachrec;
using namespace reachrec::nn;
using data::FrameLabel;
using features::FeatureVector;
using test_support::perturbed_params;
using test_support::random_window;
using test_support::reference_lstm_logits;



TEST_CASE("count_params") {
  CHECK(count_params(LstmConfig{3, 15, 4, 2}) == 1204);
  CHECK(count_params(LstmConfig{1, 1, 1, 1}) == 14);
  CHECK(count_params(MlpConfig{}) == 143);  // default 2-6-8-5-4 baseline
  CHECK_THROWS_AS(count_params(MlpConfig{{2, 0, 0, 0, 4}}), ConfigError);
  CHECK_THROWS_AS(count_params(LstmConfig{0, 15, 4, 2}), ConfigError);
}

TEST_CASE("init_params") {
  const LstmConfig cfg;
  const auto a = init_params(cfg, 7);
  const auto b = init_params(cfg, 7);
  CHECK(a.w_ih == b.w_ih);
  CHECK(a.w_hh == b.w_hh);
  CHECK(a.b == b.b);
  const auto c = init_params(cfg, 8);
  CHECK(a.w_ih != c.w_ih);
  // forget-gate bias slice is ones, everything else zero
  const int h = cfg.hidden_dim;
  for (int k = 0; k < h; ++k) {
    CHECK(a.b(k) == 0.0);
    CHECK(a.b(h + k) == 1.0);
    CHECK(a.b(2 * h + k) == 0.0);
    CHECK(a.b(3 * h + k) == 0.0);
  }
  const double bound = std::sqrt(1.0 / h);
  CHECK(a.w_ih.cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("forward") {
  const LstmConfig cfg;
  SUBCASE("all-zero params give uniform scores") {
    LstmParams p;
    p.w_ih = Eigen::MatrixXd::Zero(60, 3);
    p.w_hh = Eigen::MatrixXd::Zero(60, 15);
    p.b = Eigen::VectorXd::Zero(60);
    p.w_out = Eigen::MatrixXd::Zero(4, 15);
    p.b_out = Eigen::VectorXd::Zero(4);
    const auto logits = forward(cfg, p, {{0.5, 0.0, 0.1}, {0.4, -0.1, 0.2}});
    CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
    const auto s = softmax(logits);
    for (int i = 0; i < 4; ++i) CHECK(s(i) == doctest::Approx(0.25));
  }
  SUBCASE("purity") {
    Rng rng(3);
    const auto p = perturbed_params(cfg, rng);
    const auto w = random_window(rng, 2);
    CHECK(forward(cfg, p, w) == forward(cfg, p, w));
  }
  SUBCASE("agrees with the scalar reference recurrence") {
    Rng rng(12);
    for (int it = 0; it < 50; ++it) {
      LstmConfig c2 = cfg;
      c2.hidden_dim = static_cast<int>(rng.uniform_int(1, 15));
      c2.window = static_cast<int>(rng.uniform_int(1, 4));
      const auto p = perturbed_params(c2, rng);
      const auto w = random_window(rng, c2.window);
      const auto got = forward(c2, p, w);
      const auto want = reference_lstm_logits(c2, p, w);
      for (int i = 0; i < 4; ++i)
        CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch") {
    const auto p = init_params(cfg, 0);
    CHECK_THROWS_AS(forward(cfg, p, {{0.5, 0.0, 0.1}}), DataError);  // window too short
  }
}

TEST_CASE("loss") {
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(4);
  SUBCASE("uniform logits") {
    CHECK(loss(Eigen::VectorXd::Zero(4), FrameLabel::NoR, unit) ==
          doctest::Approx(std::log(4.0)));
  }
  SUBCASE("stabilized against overflow") {
    Eigen::VectorXd big(4);
    big << 1000.0, 0.0, 0.0, 0.0;
    const double v = loss(big, FrameLabel::NoR, unit);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("linear in the class weight") {
    Eigen::VectorXd logits(4);
    logits << 0.3, -0.2, 1.0, 0.1;
    Eigen::VectorXd w2 = unit;
    w2(2) = 2.0;
    CHECK(loss(logits, FrameLabel::R, w2) == doctest::Approx(2.0 * loss(logits, FrameLabel::R, unit)));
  }
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(99);
  const double step = 1e-5;
  int instances = 0;
  for (int it = 0; it < 100; ++it) {
    LstmConfig cfg;
    cfg.hidden_dim = (it % 3 == 0) ? 15 : static_cast<int>(rng.uniform_int(2, 8));
    cfg.window = (it % 2 == 0) ? 2 : 3;
    LstmParams p = perturbed_params(cfg, rng);
    const auto window = random_window(rng, cfg.window);
    const auto target = static_cast<FrameLabel>(rng.uniform_int(0, 3));
    Eigen::VectorXd weights(4);
    for (int i = 0; i < 4; ++i) weights(i) = rng.uniform(0.25, 8.0);

    LstmParams grads = backward(cfg, p, window, target, weights);
    auto pblocks = param_blocks(p);
    auto gblocks = param_blocks(grads);
    for (std::size_t bi = 0; bi < pblocks.size(); ++bi) {
      for (std::ptrdiff_t k = 0; k < pblocks[bi].size; ++k) {
        const double orig = pblocks[bi].data[k];
        pblocks[bi].data[k] = orig + step;
        const double up = loss(forward(cfg, p, window), target, weights);
        pblocks[bi].data[k] = orig - step;
        const double dn = loss(forward(cfg, p, window), target, weights);
        pblocks[bi].data[k] = orig;
        const double fd = (up - dn) / (2.0 * step);
        const double an = gblocks[bi].data[k];
        const double tol = std::max(1e-4 * std::max(std::abs(fd), std::abs(an)), 1e-8);
        if (std::abs(fd - an) > tol) {
          CAPTURE(pblocks[bi].name);
          CAPTURE(k);
          REQUIRE(std::abs(fd - an) <= tol);
        }
      }
    }
    ++instances;
  }
  CHECK(instances == 100);
}

TEST_CASE("backward special cases") {
  Rng rng(5);
  const LstmConfig cfg;
  const auto p = perturbed_params(cfg, rng);
  const auto window = random_window(rng, 2);
  SUBCASE("zero class weight zeroes the gradient") {
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(4);
    weights(1) = 0.0;
    LstmParams g = backward(cfg, p, window, FrameLabel::RN, weights);
    for (const auto& blk : param_blocks(g))
      for (std::ptrdiff_t k = 0; k < blk.size; ++k) CHECK(blk.data[k] == 0.0);
  }
  SUBCASE("b_out gradient is weight * (softmax - onehot)") {
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(4);
    weights(2) = 3.0;
    LstmParams g = backward(cfg, p, window, FrameLabel::R, weights);
    const Eigen::VectorXd probs = softmax(forward(cfg, p, window));
    Eigen::VectorXd want = probs;
    want(2) -= 1.0;
    want *= 3.0;
    for (int i = 0; i < 4; ++i) CHECK(g.b_out(i) == doctest::Approx(want(i)).epsilon(1e-12));
  }
}

TEST_CASE("mlp backward matches finite differences") {
  Rng rng(123);
  const double step = 1e-5;
  for (int it = 0; it < 30; ++it) {
    MlpConfig cfg;
    MlpParams p = init_params(cfg, rng.next());
    for (auto& blk : param_blocks(p))
      for (std::ptrdiff_t k = 0; k < blk.size; ++k) blk.data[k] += rng.uniform(-0.3, 0.3);
    const FeatureVector fv{rng.uniform(0.0, 1.2), rng.uniform(-0.2, 0.2), rng.uniform(0.0, 1.0)};
    const auto target = static_cast<FrameLabel>(rng.uniform_int(0, 3));
    Eigen::VectorXd weights(4);
    for (int i = 0; i < 4; ++i) weights(i) = rng.uniform(0.25, 8.0);

    MlpParams grads = backward(cfg, p, fv, target, weights);
    auto pblocks = param_blocks(p);
    auto gblocks = param_blocks(grads);
    for (std::size_t bi = 0; bi < pblocks.size(); ++bi)
      for (std::ptrdiff_t k = 0; k < pblocks[bi].size; ++k) {
        const double orig = pblocks[bi].data[k];
        pblocks[bi].data[k] = orig + step;
        const double up = loss(forward(cfg, p, fv), target, weights);
        pblocks[bi].data[k] = orig - step;
        const double dn = loss(forward(cfg, p, fv), target, weights);
        pblocks[bi].data[k] = orig;
        const double fd = (up - dn) / (2.0 * step);
        const double an = gblocks[bi].data[k];
        REQUIRE(std::abs(fd - an) <= std::max(1e-4 * std::max(std::abs(fd), std::abs(an)), 1e-8));
      }
  }
}

TEST_CASE("adam_step") {
  TrainHyper hyper;
  SUBCASE("first step moves by about lr in the gradient's direction") {
    LstmConfig cfg{1, 1, 1, 1};
    LstmParams p = init_params(cfg, 1);
    LstmParams g = init_params(cfg, 2);
    for (auto& blk : param_blocks(g))
      for (std::ptrdiff_t k = 0; k < blk.size; ++k) blk.data[k] = (k % 2 == 0) ? 0.7 : -1.3;
    LstmParams before = p;
    AdamState st;
    adam_step(st, param_blocks(p), param_blocks(g), hyper);
    auto pb = param_blocks(p);
    auto bb = param_blocks(before);
    auto gb = param_blocks(g);
    for (std::size_t bi = 0; bi < pb.size(); ++bi)
      for (std::ptrdiff_t k = 0; k < pb[bi].size; ++k) {
        const double delta = pb[bi].data[k] - bb[bi].data[k];
        const double expect = -hyper.learning_rate * (gb[bi].data[k] > 0 ? 1.0 : -1.0);
        CHECK(std::abs(delta) <= hyper.learning_rate);
        CHECK(std::abs(delta) >= hyper.learning_rate * (1.0 - 1e-3));
        CHECK(delta * expect > 0.0);
      }
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    LstmConfig cfg{2, 3, 4, 2};
    LstmParams p = init_params(cfg, 1);
    const LstmParams before = p;
    LstmParams g = p;
    for (auto& blk : param_blocks(g))
      for (std::ptrdiff_t k = 0; k < blk.size; ++k) blk.data[k] = 0.0;
    AdamState st;
    adam_step(st, param_blocks(p), param_blocks(g), hyper);
    adam_step(st, param_blocks(p), param_blocks(g), hyper);
    CHECK(p.w_ih == before.w_ih);
    CHECK(p.w_hh == before.w_hh);
  }
  SUBCASE("identical runs are bit-identical") {
    LstmConfig cfg{2, 3, 4, 2};
    auto run = [&] {
      LstmParams p = init_params(cfg, 1);
      AdamState st;
      Rng rng(55);
      for (int i = 0; i < 20; ++i) {
        LstmParams g = p;
        for (auto& blk : param_blocks(g))
          for (std::ptrdiff_t k = 0; k < blk.size; ++k) blk.data[k] = rng.uniform(-1, 1);
        adam_step(st, param_blocks(p), param_blocks(g), hyper);
      }
      return p;
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.w_ih == b.w_ih);
    CHECK(a.b == b.b);
  }
  SUBCASE("non-finite gradients are rejected by block name") {
    LstmConfig cfg{2, 3, 4, 2};
    LstmParams p = init_params(cfg, 1);
    LstmParams g = p;
    g.w_hh(0, 0) = std::numeric_limits<double>::quiet_NaN();
    AdamState st;
    CHECK_THROWS_WITH_AS(adam_step(st, param_blocks(p), param_blocks(g), TrainHyper{}),
                         doctest::Contains("w_hh"), DataError);
  }
}

// ---------------------------------------------------------------------------
// training on a separable toy problem

namespace {

// four well-separated feature clusters, one per class
FeatureVector toy_vec(FrameLabel l, Rng& rng) {
  const double n = rng.uniform(-0.01, 0.01);
  switch (l) {
    case FrameLabel::NoR: return {0.8 + n, 0.0 + n, 0.0};
    case FrameLabel::RN: return {0.5 + n, -0.1 + n, 0.0};
    case FrameLabel::R: return {0.25 + n, -0.1 + n, 0.0};
    case FrameLabel::RF: return {0.05 + n, -0.05 + n, 0.9 + n};
  }
  return {};
}

std::vector<LabeledStream> toy_streams(int n_streams, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledStream> out;
  for (int s = 0; s < n_streams; ++s) {
    LabeledStream ls;
    ls.stream.video_id = "toy" + std::to_string(s);
    const long pre = rng.uniform_int(3, 6), mid = rng.uniform_int(3, 8), post = rng.uniform_int(2, 5);
    std::vector<FrameLabel> labels;
    for (long i = 0; i < pre; ++i) labels.push_back(FrameLabel::NoR);
    labels.push_back(FrameLabel::RN);
    for (long i = 0; i < mid; ++i) labels.push_back(FrameLabel::R);
    labels.push_back(FrameLabel::RF);
    for (long i = 0; i < post; ++i) labels.push_back(FrameLabel::NoR);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      ls.stream.frame_index.push_back(static_cast<long>(i));
      ls.stream.vecs.push_back(toy_vec(labels[i], rng));
      ls.stream.valid.push_back(true);
      ls.stream.target_id.emplace_back("o");
    }
    ls.labels = labels;
    out.push_back(std::move(ls));
  }
  return out;
}

// brute-force oracle: nearest-centroid over the toy clusters separates them
double centroid_oracle_accuracy(const std::vector<LabeledStream>& set) {
  const FeatureVector centroids[4] = {{0.8, 0.0, 0.0}, {0.5, -0.1, 0.0},
                                      {0.25, -0.1, 0.0}, {0.05, -0.05, 0.9}};
  long correct = 0, total = 0;
  for (const auto& ls : set)
    for (std::size_t i = 0; i < ls.stream.size(); ++i) {
      int best = 0;
      double best_d = 1e18;
      for (int c = 0; c < 4; ++c) {
        const auto& fv = ls.stream.vecs[i];
        const double dx = fv.d_norm - centroids[c].d_norm;
        const double dy = fv.delta_d - centroids[c].delta_d;
        const double dz = fv.iou - centroids[c].iou;
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      correct += (best == static_cast<int>(ls.labels[i])) ? 1 : 0;
      ++total;
    }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("train reaches 99% on a separable toy set within 50 epochs") {
  const auto streams = toy_streams(12, 2026);
  CHECK(centroid_oracle_accuracy(streams) == 1.0);  // separability oracle

  TrainHyper hyper;
  hyper.epochs = 50;
  hyper.seed = 3;

  // an lr-0 single-epoch run measures the initialization's loss under the
  // same class weighting, anchoring the first-epoch decrease check
  TrainHyper frozen = hyper;
  frozen.learning_rate = 0.0;
  frozen.epochs = 1;
  const double init_loss =
      train(ModelKind::BabynetLstm, streams, {}, frozen).history.front().train_loss;

  const auto result = train(ModelKind::BabynetLstm, streams, {}, hyper);
  REQUIRE_FALSE(result.history.empty());
  CHECK(result.history.back().train_accuracy >= 0.99);
  // loss decreases already over the first epoch
  CHECK(result.history.front().train_loss < init_loss);
  CHECK(result.history.back().train_loss < result.history.front().train_loss);
}

TEST_CASE("train with lr 0 returns the initialization") {
  const auto streams = toy_streams(3, 1);
  TrainHyper hyper;
  hyper.learning_rate = 0.0;
  hyper.epochs = 3;
  hyper.seed = 9;
  const auto result = train(ModelKind::BabynetLstm, streams, {}, hyper);
  const auto init = init_params(LstmConfig{}, 9);
  CHECK(result.model.lstm.w_ih == init.w_ih);
  CHECK(result.model.lstm.w_hh == init.w_hh);
  CHECK(result.model.lstm.b == init.b);
  CHECK(result.model.lstm.w_out == init.w_out);
}

TEST_CASE("train is deterministic under seed") {
  const auto streams = toy_streams(6, 77);
  const auto val = toy_streams(2, 78);
  TrainHyper hyper;
  hyper.epochs = 8;
  hyper.seed = 4;
  const auto a = train(ModelKind::BabynetLstm, streams, val, hyper);
  const auto b = train(ModelKind::BabynetLstm, streams, val, hyper);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
    CHECK(a.history[i].epoch == static_cast<int>(i) + 1);  // epochs in order
  }
  CHECK(save_model(a.model) == save_model(b.model));
}

TEST_CASE("predict") {
  const auto streams = toy_streams(1, 5);
  const Model model = make_model(ModelKind::BabynetLstm, 1);
  SUBCASE("rows are probability vectors") {
    const auto scores = predict(model, streams[0].stream);
    REQUIRE(scores.rows() == static_cast<long>(streams[0].stream.size()));
    for (long t = 0; t < scores.rows(); ++t) {
      CHECK(scores.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(scores.row(t).minCoeff() >= 0.0);
    }
  }
  SUBCASE("single-frame stream uses the duplicated pad") {
    features::FeatureStream one;
    one.video_id = "one";
    one.frame_index = {0};
    one.vecs = {{0.3, -0.05, 0.0}};
    one.valid = {true};
    one.target_id = {"o"};
    const auto scores = predict(model, one);
    CHECK(scores.rows() == 1);
    CHECK(scores.row(0).sum() == doctest::Approx(1.0));
  }
  SUBCASE("constant stream gives constant scores after frame 0") {
    features::FeatureStream cst;
    cst.video_id = "c";
    for (long f = 0; f < 6; ++f) {
      cst.frame_index.push_back(f);
      cst.vecs.push_back({0.4, 0.0, 0.1});
      cst.valid.push_back(true);
      cst.target_id.emplace_back("o");
    }
    const auto scores = predict(model, cst);
    for (long t = 1; t < scores.rows(); ++t)
      CHECK((scores.row(t) - scores.row(1)).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("model save/load") {
  Rng rng(31);
  SUBCASE("round trip is bit-exact for both kinds") {
    for (const ModelKind kind : {ModelKind::BabynetLstm, ModelKind::MlpBaseline}) {
      Model m = make_model(kind, rng.next());
      const std::string bytes = save_model(m);
      const Model back = load_model(bytes);
      CHECK(back.kind == m.kind);
      if (kind == ModelKind::BabynetLstm) {
        CHECK(back.lstm.w_ih == m.lstm.w_ih);
        CHECK(back.lstm.w_hh == m.lstm.w_hh);
        CHECK(back.lstm.b == m.lstm.b);
        CHECK(back.lstm.w_out == m.lstm.w_out);
        CHECK(back.lstm.b_out == m.lstm.b_out);
      } else {
        for (std::size_t l = 0; l < m.mlp.w.size(); ++l) {
          CHECK(back.mlp.w[l] == m.mlp.w[l]);
          CHECK(back.mlp.b[l] == m.mlp.b[l]);
        }
      }
      CHECK(save_model(back) == bytes);
    }
  }
  SUBCASE("truncated file errors cleanly") {
    const std::string bytes = save_model(make_model(ModelKind::BabynetLstm, 1));
    CHECK_THROWS_AS(load_model(bytes.substr(0, bytes.size() / 2)), DataError);
    CHECK_THROWS_AS(load_model(""), DataError);
  }
  SUBCASE("shape mismatch errors cleanly") {
    Model m = make_model(ModelKind::BabynetLstm, 1);
    std::string bytes = save_model(m);
    // declare hidden 16 while matrices stay sized for 15
    const auto pos = bytes.find("\"hidden_dim\": 15");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 16, "\"hidden_dim\": 16");
    CHECK_THROWS_AS(load_model(bytes), DataError);
  }
  SUBCASE("non-finite parameters are rejected at save") {
    Model m = make_model(ModelKind::BabynetLstm, 1);
    m.lstm.w_out(1, 2) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(save_model(m), doctest::Contains("w_out"), DataError);
  }
  SUBCASE("unknown kind and version are rejected") {
    CHECK_THROWS_AS(load_model(R"({"format_version":2,"kind":"babynet-lstm"})"), DataError);
    CHECK_THROWS_AS(load_model(R"({"format_version":1,"kind":"cnn"})"), DataError);
  }
}
