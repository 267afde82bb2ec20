#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "p2p/config.hpp"
#include "p2p/dataset.hpp"
#include "p2p/errors.hpp"
#include "p2p/geometry.hpp"
#include "p2p/harness.hpp"
#include "p2p/pcd_prep.hpp"
#include "p2p/pose.hpp"
#include "p2p/report.hpp"
#include "p2p/synth.hpp"

namespace py = pybind11;
using namespace p2p;

namespace {

Rotation6D to_6d(const Eigen::Matrix<double, 6, 1>& v) {
  Rotation6D r;
  r.a1 = v.head<3>();
  r.a2 = v.tail<3>();
  return r;
}

PoseFrame frame_of(const Matrix& coords, const Matrix& rots) { return PoseFrame{coords, rots}; }

py::dict sequence_dict(const std::string& id, const PointCloudSequence& clouds, const PoseSequence& poses) {
  py::list pts, coords, rots;
  for (const auto& f : clouds.frames) pts.append(f);
  for (const auto& p : poses.frames) {
    coords.append(p.coords);
    rots.append(p.rots);
  }
  py::dict d;
  d["id"] = id;
  d["points"] = pts;
  d["coords"] = coords;
  d["rots"] = rots;
  return d;
}

PoseSequence poses_of(const std::vector<Matrix>& coords, const std::vector<Matrix>& rots) {
  if (coords.size() != rots.size()) throw ShapeError("coords and rots differ in length");
  PoseSequence s;
  for (std::size_t k = 0; k < coords.size(); ++k) s.frames.push_back({coords[k], rots[k]});
  return s;
}

py::dict report_dict(const RolloutReport& r) {
  py::list frames;
  for (const auto& f : r.frames) {
    py::dict d;
    d["frame"] = f.frame;
    d["mpjpe_mm"] = f.mpjpe_mm;
    d["angular_deg"] = f.angular_deg;
    d["history"] = f.history;
    frames.append(d);
  }
  py::dict d;
  d["frames"] = frames;
  d["mean_mpjpe_mm"] = r.mean_mpjpe_mm;
  d["mean_angular_deg"] = r.mean_angular_deg;
  d["mode"] = r.mode;
  d["init"] = r.init;
  d["window"] = r.window;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Point2Pose core bindings";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DegenerateRotation>(m, "DegenerateRotation", base.ptr());
  py::register_exception<InvalidRotation>(m, "InvalidRotation", base.ptr());
  py::register_exception<InvalidSkeleton>(m, "InvalidSkeleton", base.ptr());
  py::register_exception<DatasetFormatError>(m, "DatasetFormatError", base.ptr());
  py::register_exception<EmptySegmentation>(m, "EmptySegmentation", base.ptr());
  py::register_exception<EmptyResult>(m, "EmptyResult", base.ptr());
  py::register_exception<EmptyInput>(m, "EmptyInput", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  // pose
  m.def("encode_rotation", [](const Mat3& R) {
    const auto r = encode_rotation(R);
    Eigen::Matrix<double, 6, 1> v;
    v << r.a1, r.a2;
    return v;
  }, py::arg("R"), "6D encoding [a1, a2] of a rotation matrix.");
  m.def("decode_rotation", [](const Eigen::Matrix<double, 6, 1>& v) { return decode_rotation(to_6d(v)); },
        py::arg("r6"));
  m.def("mpjpe", [](const Matrix& pred, const Matrix& gt) {
    return mpjpe(frame_of(pred, Matrix::Zero(pred.rows(), 6)), frame_of(gt, Matrix::Zero(gt.rows(), 6)));
  }, py::arg("pred"), py::arg("gt"), "Root-relative mean joint error in mm; rows are joints.");
  m.def("angular_error", [](const Matrix& pred, const Matrix& gt) {
    return angular_error(frame_of(Matrix::Zero(pred.rows(), 3), pred), frame_of(Matrix::Zero(gt.rows(), 3), gt));
  }, py::arg("pred_rots"), py::arg("gt_rots"), "Mean geodesic angle in degrees between J x 6 rotation sets.");
  m.def("skeleton_parents", [](int joints) { return SkeletonGraph::standard(joints).parents(); }, py::arg("joints"));

  // geometry and filtering
  m.def("farthest_point_sampling", &farthest_point_sampling, py::arg("points"), py::arg("count"),
        py::arg("seed_index") = 0);
  m.def("farthest_from_centroid", &farthest_from_centroid, py::arg("points"));
  m.def("k_nearest", [](const Matrix& p, const Vec3& q, int k) { return k_nearest(p, q, k); }, py::arg("points"),
        py::arg("query"), py::arg("k"));
  m.def("dbscan", &dbscan, py::arg("points"), py::arg("eps"), py::arg("min_pts"));
  m.def("sor", &sor, py::arg("points"), py::arg("k"), py::arg("std_ratio"));
  m.def("gpc", [](const Matrix& points, double lambda, int min_cluster, int k, double cell, double margin) {
    GpcParams p;
    p.lambda = lambda;
    p.min_cluster = min_cluster;
    p.k = k;
    p.cell = cell;
    p.depth_margin = margin;
    return gpc(points, p);
  }, py::arg("points"), py::arg("lam") = 2.0, py::arg("min_cluster") = 10, py::arg("k") = 8, py::arg("cell") = 0.05,
        py::arg("depth_margin") = 0.3, "Indices kept by graph-based clustering; depth is the z column.");
  m.def("chamfer", &chamfer, py::arg("a"), py::arg("b"));

  // data
  m.def("generate_sequence", [](int joints, int frames, int points, std::uint64_t seed, double amplitude) {
    const auto g = generate_sequence(SyntheticBody::standard(joints), MotionScript::random(joints, seed, amplitude),
                                     frames, points);
    return sequence_dict("synthetic", g.clouds, g.poses);
  }, py::arg("joints") = 24, py::arg("frames") = 32, py::arg("points") = 256, py::arg("seed") = 0,
        py::arg("amplitude") = 0.5);
  m.def("read_dataset", [](const std::filesystem::path& dir) {
    const auto ds = read_dataset(dir);
    py::list seqs;
    for (const auto& s : ds.sequences) seqs.append(sequence_dict(s.id, s.clouds, s.poses));
    py::dict d;
    d["joints"] = ds.meta.num_joints;
    d["points"] = ds.meta.num_points;
    d["window"] = ds.meta.window;
    d["parents"] = ds.meta.parents;
    d["sequences"] = seqs;
    return d;
  }, py::arg("path"));

  // config
  py::class_<ExperimentConfig>(m, "Config")
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("to_yaml", &ExperimentConfig::to_yaml)
      .def("hash", &ExperimentConfig::hash)
      .def_property_readonly("joints", [](const ExperimentConfig& c) { return c.model.joints; })
      .def_property_readonly("window", [](const ExperimentConfig& c) { return c.model.window; })
      .def_property_readonly("points", [](const ExperimentConfig& c) { return c.model.points; })
      .def_property_readonly("mode", [](const ExperimentConfig& c) { return to_string(c.diffusion.mode); })
      .def_property_readonly("iterations", [](const ExperimentConfig& c) { return c.diffusion.iterations; });

  // model
  py::class_<LoadedCheckpoint>(m, "Checkpoint")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def_property_readonly("config", [](const LoadedCheckpoint& c) { return c.config; })
      .def_property_readonly("step", [](const LoadedCheckpoint& c) { return c.meta.step; })
      .def_property_readonly("num_parameters",
                             [](const LoadedCheckpoint& c) { return c.model->params().total_scalars(); })
      .def("sample", [](const LoadedCheckpoint& c, const std::vector<Matrix>& clouds,
                        const std::vector<Matrix>& history_coords, const std::vector<Matrix>& history_rots,
                        std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const auto p = c.model->sample(PointCloudSequence{clouds}, poses_of(history_coords, history_rots),
                                       c.config.diffusion, rng);
        return py::make_tuple(p.coords, p.rots);
      }, py::arg("clouds"), py::arg("history_coords"), py::arg("history_rots"), py::arg("seed") = 0,
           "Pose for the last cloud frame given root-relative history poses.")
      .def("rollout", [](const LoadedCheckpoint& c, const std::vector<Matrix>& clouds, const std::vector<Matrix>& coords,
                         const std::vector<Matrix>& rots, int window, bool teacher_forcing, bool noise_init,
                         std::uint64_t seed) {
        RolloutOptions o;
        o.window = window > 0 ? window : c.config.model.window;
        o.teacher_forcing = teacher_forcing;
        o.init = noise_init ? InitMode::kNoise : InitMode::kGroundTruth;
        o.seed = seed;
        return report_dict(rollout(*c.model, c.config.diffusion, PointCloudSequence{clouds}, poses_of(coords, rots), o));
      }, py::arg("clouds"), py::arg("coords"), py::arg("rots"), py::arg("window") = 0,
           py::arg("teacher_forcing") = false, py::arg("noise_init") = false, py::arg("seed") = 0);
}
