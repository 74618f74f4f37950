// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "reachrec/data.hpp"
#include "reachrec/features.hpp"

namespace reachrec::nn {

inline constexpr int kNumClasses = 4;

// ---------------------------------------------------------------------------
// Configs and parameters

struct LstmConfig {
  int input_dim = features::kFeatureDim;
  int hidden_dim = 15;
  int n_classes = kNumClasses;
  int window = 2;  // frames per prediction window (T)
};

/// Single-layer LSTM weights with a linear class head. Gate rows are stacked
/// in the fixed order (input, forget, cell-candidate, output).
struct LstmParams {
  Eigen::MatrixXd w_ih;   // 4h x input_dim
  Eigen::MatrixXd w_hh;   // 4h x hidden_dim
  Eigen::VectorXd b;      // 4h
  Eigen::MatrixXd w_out;  // n_classes x hidden_dim
  Eigen::VectorXd b_out;  // n_classes
};

/// Memoryless baseline: tanh MLP over (d_norm, iou) of the current frame.
/// widths = layer sizes input..output; default 2-6-8-5-4 (143 parameters,
/// the closest biased reconstruction of the reported 144).
struct MlpConfig {
  std::vector<int> widths{2, 6, 8, 5, 4};
};

struct MlpParams {
  std::vector<Eigen::MatrixXd> w;  // per layer: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> b;  // per layer: widths[l+1]
};

struct TrainHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 40;
  int batch_size = 1;
  std::vector<double> class_weights;  // empty -> inverse frequency, clipped to [0.25, 8]
  std::uint64_t seed = 0;
};

long count_params(const LstmConfig& cfg);
long count_params(const MlpConfig& cfg);

LstmParams init_params(const LstmConfig& cfg, std::uint64_t seed);
MlpParams init_params(const MlpConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Forward / loss / backward

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

/// Run the LSTM over one window (h0 = c0 = 0 unless given); logits of the
/// last frame. The prediction is attached to the window's final frame.
Eigen::VectorXd forward(const LstmConfig& cfg, const LstmParams& p,
                        const std::vector<features::FeatureVector>& window,
                        LstmState* final_state = nullptr, const LstmState* initial_state = nullptr);

Eigen::VectorXd forward(const MlpConfig& cfg, const MlpParams& p, const features::FeatureVector& fv);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Weighted cross entropy -w[target] * log softmax(logits)[target], with
/// max-subtraction stabilization.
double loss(const Eigen::VectorXd& logits, data::FrameLabel target,
            const Eigen::VectorXd& class_weights);

/// Exact gradient of loss(forward(window), target) in every parameter, by
/// backpropagation through the window recurrence.
LstmParams backward(const LstmConfig& cfg, const LstmParams& p,
                    const std::vector<features::FeatureVector>& window, data::FrameLabel target,
                    const Eigen::VectorXd& class_weights, double* loss_out = nullptr);

MlpParams backward(const MlpConfig& cfg, const MlpParams& p, const features::FeatureVector& fv,
                   data::FrameLabel target, const Eigen::VectorXd& class_weights,
                   double* loss_out = nullptr);

// ---------------------------------------------------------------------------
// Adam

/// Named view over one parameter tensor, used by the optimizer.
struct ParamBlock {
  std::string name;
  double* data = nullptr;
  std::ptrdiff_t size = 0;
};

std::vector<ParamBlock> param_blocks(LstmParams& p);
std::vector<ParamBlock> param_blocks(MlpParams& p);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long t = 0;  // completed steps
};

/// One bias-corrected Adam update. Throws on non-finite gradients, naming
/// the offending parameter block.
void adam_step(AdamState& state, std::vector<ParamBlock> params,
               const std::vector<ParamBlock>& grads, const TrainHyper& hyper);

// ---------------------------------------------------------------------------
// Whole-model interface

enum class ModelKind { BabynetLstm, MlpBaseline };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

struct Model {
  ModelKind kind = ModelKind::BabynetLstm;
  LstmConfig lstm_cfg;
  LstmParams lstm;
  MlpConfig mlp_cfg;
  MlpParams mlp;

  long n_params() const;
  int window() const { return kind == ModelKind::BabynetLstm ? lstm_cfg.window : 1; }
};

Model make_model(ModelKind kind, std::uint64_t seed);

/// Per-frame class probabilities (rows sum to 1) over a whole stream.
/// Windows slide with the stream's first frame duplicated as left padding.
Eigen::MatrixXd predict(const Model& model, const features::FeatureStream& stream);

struct LabeledStream {
  features::FeatureStream stream;
  std::vector<data::FrameLabel> labels;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  Model model;  // parameters from the best-validation-accuracy epoch
  std::vector<EpochStats> history;
  int best_epoch = 0;
  Eigen::VectorXd class_weights;
};

/// Deterministic online-Adam training loop. Windows with an invalid target
/// frame are masked out of the loss.
TrainResult train(ModelKind kind, const std::vector<LabeledStream>& train_set,
                  const std::vector<LabeledStream>& val_set, const TrainHyper& hyper);

TrainResult train_lstm(const LstmConfig& cfg, const std::vector<LabeledStream>& train_set,
                       const std::vector<LabeledStream>& val_set, const TrainHyper& hyper);
TrainResult train_mlp(const MlpConfig& cfg, const std::vector<LabeledStream>& train_set,
                      const std::vector<LabeledStream>& val_set, const TrainHyper& hyper);

// ---------------------------------------------------------------------------
// Serialization (model.json)

std::string save_model(const Model& model);
Model load_model(const std::string& bytes);

}  // namespace reachrec::nn
