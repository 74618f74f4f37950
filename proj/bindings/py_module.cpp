// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "reachrec/cli.hpp"
#include "reachrec/data.hpp"
#include "reachrec/error.hpp"
#include "reachrec/events.hpp"
#include "reachrec/features.hpp"
#include "reachrec/geometry.hpp"
#include "reachrec/metrics.hpp"
#include "reachrec/nn.hpp"
#include "reachrec/synth.hpp"

namespace py = pybind11;
using namespace reachrec;

namespace {

features::FeatureStream stream_from_array(const Eigen::MatrixXd& feats) {
  if (feats.cols() != 3) throw DataError("features array must be n x 3 (d_norm, delta_d, iou)");
  features::FeatureStream fs;
  fs.video_id = "array";
  for (long t = 0; t < feats.rows(); ++t) {
    fs.frame_index.push_back(t);
    fs.vecs.push_back({feats(t, 0), feats(t, 1), feats(t, 2)});
    fs.valid.push_back(true);
    fs.target_id.emplace_back("obj0");
  }
  return fs;
}

events::FusionPolicy make_policy(const std::string& mode, int min_duration, double score_margin,
                                 const std::string& offset_semantics) {
  events::FusionPolicy p;
  p.mode = cli::policy_from_name(mode);
  p.min_duration = min_duration;
  p.score_margin = score_margin;
  p.offset_semantics = cli::offset_semantics_from_name(offset_semantics);
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Infant reaching recognition from bounding-box streams";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");

  // --- geometry -----------------------------------------------------------
  py::class_<geometry::Point2>(m, "Point2")
      .def(py::init<double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0)
      .def_readwrite("x", &geometry::Point2::x)
      .def_readwrite("y", &geometry::Point2::y)
      .def("__repr__", [](const geometry::Point2& p) {
        return "Point2(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")";
      });

  py::class_<geometry::BoundingBox>(m, "BoundingBox")
      .def(py::init<double, double, double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0,
           py::arg("w") = 0.0, py::arg("h") = 0.0)
      .def_readwrite("x", &geometry::BoundingBox::x)
      .def_readwrite("y", &geometry::BoundingBox::y)
      .def_readwrite("w", &geometry::BoundingBox::w)
      .def_readwrite("h", &geometry::BoundingBox::h)
      .def("area", &geometry::BoundingBox::area)
      .def("__repr__", [](const geometry::BoundingBox& b) {
        return "BoundingBox(" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " +
               std::to_string(b.w) + ", " + std::to_string(b.h) + ")";
      });

  m.def("center", &geometry::center, py::arg("box"));
  m.def("distance", &geometry::distance, py::arg("p"), py::arg("q"));
  m.def("iou", &geometry::iou, py::arg("a"), py::arg("b"));

  // --- data ---------------------------------------------------------------
  py::enum_<data::Hand>(m, "Hand").value("Left", data::Hand::Left).value("Right", data::Hand::Right);

  py::enum_<data::FrameLabel>(m, "FrameLabel")
      .value("NoR", data::FrameLabel::NoR)
      .value("RN", data::FrameLabel::RN)
      .value("R", data::FrameLabel::R)
      .value("RF", data::FrameLabel::RF);

  py::class_<data::ReachEvent>(m, "ReachEvent")
      .def(py::init([](data::Hand hand, const std::string& object_id, long onset, long offset) {
             return data::ReachEvent{hand, object_id, onset, offset};
           }),
           py::arg("hand"), py::arg("object_id"), py::arg("onset_frame"), py::arg("offset_frame"))
      .def_readwrite("hand", &data::ReachEvent::hand)
      .def_readwrite("object_id", &data::ReachEvent::object_id)
      .def_readwrite("onset_frame", &data::ReachEvent::onset_frame)
      .def_readwrite("offset_frame", &data::ReachEvent::offset_frame);

  m.def("labels_from_events", &data::labels_from_events, py::arg("events"), py::arg("n_frames"),
        py::arg("hand"));
  m.def(
      "events_from_labels",
      [](const std::vector<data::FrameLabel>& labels) {
        const auto d = data::events_from_labels(labels);
        return py::make_tuple(d.events, d.warnings);
      },
      py::arg("labels"), "Returns (events, warnings)");
  m.def(
      "split_dataset",
      [](std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
        const auto s = data::split_dataset(n, ratios, seed);
        return py::make_tuple(s.train, s.val, s.test);
      },
      py::arg("n_samples"), py::arg("ratios"), py::arg("seed"),
      "Deterministic train/val/test index partition");

  // --- nn -----------------------------------------------------------------
  m.def(
      "count_params",
      [](int input_dim, int hidden_dim, int n_classes) {
        return nn::count_params(nn::LstmConfig{input_dim, hidden_dim, n_classes, 2});
      },
      py::arg("input_dim") = 3, py::arg("hidden_dim") = 15, py::arg("n_classes") = 4,
      "Trainable parameter count of the LSTM classifier");

  m.def(
      "predict_scores",
      [](const std::string& model_json, const Eigen::MatrixXd& feats) {
        const nn::Model model = nn::load_model(model_json);
        return nn::predict(model, stream_from_array(feats));
      },
      py::arg("model_json"), py::arg("features"),
      "Per-frame class probabilities (n x 4) from a model.json string and an n x 3 feature array");

  // --- events -------------------------------------------------------------
  m.def(
      "assemble_events",
      [](const Eigen::MatrixXd& scores, const Eigen::MatrixXd& feats, double theta,
         const std::string& mode, int min_duration, double score_margin,
         const std::string& offset_semantics) {
        const auto evs = events::assemble_events(
            scores, stream_from_array(feats), theta,
            make_policy(mode, min_duration, score_margin, offset_semantics));
        std::vector<std::pair<long, long>> out;
        for (const auto& ev : evs) out.emplace_back(ev.onset_frame, ev.offset_frame);
        return out;
      },
      py::arg("scores"), py::arg("features"), py::arg("theta"), py::arg("mode") = "fused",
      py::arg("min_duration") = 2, py::arg("score_margin") = 0.0,
      py::arg("offset_semantics") = "touch",
      "Reach events as (onset, offset) pairs from aligned scores and features");

  // --- CLI-level runs -----------------------------------------------------
  m.def(
      "gen",
      [](int n, std::uint64_t seed, const std::filesystem::path& out) {
        cli::GenOptions opt;
        opt.n = n;
        opt.seed = seed;
        opt.out = out;
        opt.config.seed = seed;
        return cli::run_gen(opt);
      },
      py::arg("n"), py::arg("seed"), py::arg("out"),
      "Write a synthetic dataset (detections.jsonl, annotations.csv, synth-manifest.json)");

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& out,
         const std::string& model, std::uint64_t seed, double lr, int epochs) {
        cli::TrainOptions opt;
        opt.data = data;
        opt.out = out;
        opt.model = nn::model_kind_from_name(model);
        opt.seed = seed;
        opt.hyper.learning_rate = lr;
        opt.hyper.epochs = epochs;
        return cli::run_train(opt);
      },
      py::arg("data"), py::arg("out"), py::arg("model") = "babynet", py::arg("seed") = 0,
      py::arg("lr") = 0.001, py::arg("epochs") = 40,
      "Train a model on a dataset directory; writes model.json and friends");

  m.def(
      "evaluate",
      [](const std::filesystem::path& data, const std::filesystem::path& model_dir,
         const std::filesystem::path& out) {
        cli::EvalOptions opt;
        opt.data = data;
        opt.model_dir = model_dir;
        opt.out = out;
        return cli::run_eval(opt);
      },
      py::arg("data"), py::arg("model"), py::arg("out"),
      "Evaluate a trained model on its held-out test split; writes report.json");

  m.def(
      "infer",
      [](const std::filesystem::path& detections, const std::filesystem::path& model_dir,
         const std::filesystem::path& out) {
        cli::InferOptions opt;
        opt.detections = detections;
        opt.model_dir = model_dir;
        opt.out = out;
        return cli::run_infer(opt);
      },
      py::arg("detections"), py::arg("model"), py::arg("out"),
      "Detect reach events in a detections.jsonl stream");
}
