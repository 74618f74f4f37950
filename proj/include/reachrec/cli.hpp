// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reachrec/data.hpp"
#include "reachrec/events.hpp"
#include "reachrec/metrics.hpp"
#include "reachrec/nn.hpp"
#include "reachrec/synth.hpp"

namespace reachrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

// ---------------------------------------------------------------------------
// Pipeline pieces shared by train/eval/infer (and the acceptance tests).

/// One reach clip: the frames of one annotated reach plus its surrounding
/// no-reach context. The unit of dataset splitting.
struct Clip {
  std::string video_id;
  data::Hand hand = data::Hand::Left;
  features::FeatureStream stream;
  std::vector<data::FrameLabel> labels;
  std::vector<std::pair<long, long>> truth_events;  // clip-local positions
};

/// Cut per-hand reach clips out of annotated sequences. Inter-event NoR
/// stretches split halfway between neighboring events. Events whose frames
/// are missing from the sequence are skipped with a warning.
std::vector<Clip> build_clips(const std::vector<data::VideoSequence>& seqs,
                              const std::vector<data::VideoAnnotations>& annotations,
                              features::Pairing pairing = features::Pairing::Sticky);

std::vector<nn::LabeledStream> to_labeled_streams(const std::vector<Clip>& clips,
                                                  const std::vector<std::size_t>& indices);
std::vector<events::CalibrationSample> to_calibration_samples(
    const std::vector<Clip>& clips, const std::vector<std::size_t>& indices);
std::vector<metrics::EvalSample> to_eval_samples(const std::vector<Clip>& clips,
                                                 const std::vector<std::size_t>& indices);

// ---------------------------------------------------------------------------
// Subcommands. Each writes its resolved config and seed next to its outputs
// so a recorded run reproduces byte-for-byte.

struct GenOptions {
  int n = 63;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  synth::SynthConfig config;
};

int run_gen(const GenOptions& opt);

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  nn::ModelKind model = nn::ModelKind::BabynetLstm;
  std::uint64_t seed = 0;
  nn::TrainHyper hyper;
  std::optional<int> window;
  std::optional<int> hidden;
  std::array<double, 3> split{0.60, 0.15, 0.25};
  events::PolicyMode policy = events::PolicyMode::Fused;
  events::OffsetSemantics offset_semantics = events::OffsetSemantics::Touch;
  std::optional<double> iou_threshold;  // skips calibration when given
};

int run_train(const TrainOptions& opt);

struct EvalOptions {
  std::filesystem::path data;
  std::filesystem::path model_dir;
  std::filesystem::path out;
  std::optional<double> iou_threshold;
  std::optional<events::PolicyMode> policy;
  std::optional<events::OffsetSemantics> offset_semantics;
};

int run_eval(const EvalOptions& opt);

struct InferOptions {
  std::filesystem::path detections;
  std::filesystem::path model_dir;
  std::filesystem::path out;
  std::optional<double> iou_threshold;
  std::optional<events::PolicyMode> policy;
  std::optional<events::OffsetSemantics> offset_semantics;
};

int run_infer(const InferOptions& opt);

// ---------------------------------------------------------------------------
// Small shared helpers.

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

const char* policy_name(events::PolicyMode mode);
events::PolicyMode policy_from_name(const std::string& name);
const char* offset_semantics_name(events::OffsetSemantics s);
events::OffsetSemantics offset_semantics_from_name(const std::string& name);

}  // namespace reachrec::cli
