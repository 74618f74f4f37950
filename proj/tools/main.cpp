// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reachrec/cli.hpp"
#include "reachrec/error.hpp"
#include "reachrec/log.hpp"

namespace {

using namespace reachrec;

int dispatch(int argc, char** argv) {
  CLI::App app{"reachrec: infant reaching recognition from bounding-box streams"};
  app.require_subcommand(1);

  // gen
  cli::GenOptions gen;
  std::vector<int> gen_objects, gen_pre, gen_post;
  auto* cmd_gen = app.add_subcommand("gen", "generate a labeled synthetic dataset");
  cmd_gen->add_option("--n", gen.n, "number of reach clips")->check(CLI::PositiveNumber);
  cmd_gen->add_option("--seed", gen.seed, "master seed");
  cmd_gen->add_option("--out", gen.out, "output directory")->required();
  cmd_gen->add_option("--jitter-std", gen.config.jitter_std, "positional noise, pixels");
  cmd_gen->add_option("--abort-prob", gen.config.abort_probability,
                      "probability of an inserted aborted approach")
      ->check(CLI::Range(0.0, 1.0));
  cmd_gen->add_option("--objects", gen_objects, "min,max objects per scene")->expected(2);
  cmd_gen->add_option("--pre-frames", gen_pre, "min,max idle frames before the reach")->expected(2);
  cmd_gen->add_option("--post-frames", gen_post, "min,max idle frames after the reach")->expected(2);

  // train
  cli::TrainOptions train;
  std::string train_model = "babynet";
  std::vector<double> train_split;
  int train_window = 0, train_hidden = 0;
  double train_theta = -1.0;
  std::string train_policy = "fused", train_sem = "touch";
  auto* cmd_train = app.add_subcommand("train", "train a model on a dataset directory");
  cmd_train->add_option("--data", train.data, "dataset directory (detections.jsonl + annotations.csv)")
      ->required();
  cmd_train->add_option("--out", train.out, "output directory")->required();
  cmd_train->add_option("--model", train_model, "model kind")
      ->check(CLI::IsMember({"babynet", "mlp"}));
  cmd_train->add_option("--seed", train.seed, "training seed");
  cmd_train->add_option("--lr", train.hyper.learning_rate, "Adam learning rate")
      ->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--epochs", train.hyper.epochs, "training epochs")->check(CLI::PositiveNumber);
  cmd_train->add_option("--window", train_window, "frames per prediction window (LSTM)")
      ->check(CLI::PositiveNumber);
  cmd_train->add_option("--hidden", train_hidden, "LSTM hidden units")->check(CLI::PositiveNumber);
  cmd_train->add_option("--split", train_split, "train,val,test ratios")->expected(3);
  cmd_train->add_option("--iou-threshold", train_theta, "skip calibration and pin theta")
      ->check(CLI::Range(0.0, 1.0));
  cmd_train->add_option("--policy", train_policy, "event assembly policy")
      ->check(CLI::IsMember({"rules_only", "scores_only", "fused"}));
  cmd_train->add_option("--offset-semantics", train_sem, "offset keyframe reading")
      ->check(CLI::IsMember({"touch", "literal"}));

  // eval
  cli::EvalOptions eval;
  double eval_theta = -1.0;
  std::string eval_policy, eval_sem;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained model on its held-out test split");
  cmd_eval->add_option("--data", eval.data, "dataset directory")->required();
  cmd_eval->add_option("--model", eval.model_dir, "trained model directory")->required();
  cmd_eval->add_option("--out", eval.out, "output directory")->required();
  cmd_eval->add_option("--iou-threshold", eval_theta, "override calibrated theta")
      ->check(CLI::Range(0.0, 1.0));
  cmd_eval->add_option("--policy", eval_policy, "event assembly policy")
      ->check(CLI::IsMember({"rules_only", "scores_only", "fused"}));
  cmd_eval->add_option("--offset-semantics", eval_sem, "offset keyframe reading")
      ->check(CLI::IsMember({"touch", "literal"}));

  // infer
  cli::InferOptions infer;
  double infer_theta = -1.0;
  std::string infer_policy, infer_sem;
  auto* cmd_infer = app.add_subcommand("infer", "detect reach events in a detections stream");
  cmd_infer->add_option("--detections", infer.detections, "detections.jsonl path")->required();
  cmd_infer->add_option("--model", infer.model_dir, "trained model directory")->required();
  cmd_infer->add_option("--out", infer.out, "output directory")->required();
  cmd_infer->add_option("--iou-threshold", infer_theta, "override calibrated theta")
      ->check(CLI::Range(0.0, 1.0));
  cmd_infer->add_option("--policy", infer_policy, "event assembly policy")
      ->check(CLI::IsMember({"rules_only", "scores_only", "fused"}));
  cmd_infer->add_option("--offset-semantics", infer_sem, "offset keyframe reading")
      ->check(CLI::IsMember({"touch", "literal"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  if (cmd_gen->parsed()) {
    if (!gen_objects.empty()) gen.config.n_objects = {gen_objects[0], gen_objects[1]};
    if (!gen_pre.empty()) gen.config.n_pre_frames = {gen_pre[0], gen_pre[1]};
    if (!gen_post.empty()) gen.config.n_post_frames = {gen_post[0], gen_post[1]};
    gen.config.seed = gen.seed;
    return cli::run_gen(gen);
  }
  if (cmd_train->parsed()) {
    train.model = (train_model == "mlp") ? nn::ModelKind::MlpBaseline : nn::ModelKind::BabynetLstm;
    if (train_window > 0) train.window = train_window;
    if (train_hidden > 0) train.hidden = train_hidden;
    if (!train_split.empty()) train.split = {train_split[0], train_split[1], train_split[2]};
    if (train_theta >= 0.0) train.iou_threshold = train_theta;
    train.policy = cli::policy_from_name(train_policy);
    train.offset_semantics = cli::offset_semantics_from_name(train_sem);
    return cli::run_train(train);
  }
  if (cmd_eval->parsed()) {
    if (eval_theta >= 0.0) eval.iou_threshold = eval_theta;
    if (!eval_policy.empty()) eval.policy = cli::policy_from_name(eval_policy);
    if (!eval_sem.empty()) eval.offset_semantics = cli::offset_semantics_from_name(eval_sem);
    return cli::run_eval(eval);
  }
  if (cmd_infer->parsed()) {
    if (infer_theta >= 0.0) infer.iou_threshold = infer_theta;
    if (!infer_policy.empty()) infer.policy = cli::policy_from_name(infer_policy);
    if (!infer_sem.empty()) infer.offset_semantics = cli::offset_semantics_from_name(infer_sem);
    return cli::run_infer(infer);
  }
  return cli::kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const reachrec::DataError& e) {
    log::error(e.what());
    return cli::kExitData;
  } catch (const reachrec::ConfigError& e) {
    log::error(e.what());
    return cli::kExitData;
  } catch (const std::exception& e) {
    log::error(std::string("internal error: ") + e.what());
    return cli::kExitInternal;
  }
}
