#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "p2p/pcd_prep.hpp"
#include "p2p/pose.hpp"

namespace p2p {

struct DepthFrames {
  std::vector<Matrix> frames;  // rows x cols each
  Matrix background;
  CameraIntrinsics intrinsics;
  Eigen::Matrix4d extrinsics = Eigen::Matrix4d::Identity();
};

struct SequenceRecord {
  std::string id;
  PointCloudSequence clouds;
  PoseSequence poses;
  std::optional<DepthFrames> depth;

  int frame_count() const { return static_cast<int>(poses.size()); }
};

struct DatasetMeta {
  int version = 1;
  int num_joints = 0;
  int window = 4;  // T
  int num_points = 0;
  double fps = 30.0;
  std::vector<int> parents;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<SequenceRecord> sequences;
};

inline constexpr int kDatasetVersion = 1;

/// Writes manifest.json plus seq_<id>_{points,coords,rots}.f32 (little-endian
/// float32, row-major). Returns the manifest as written.
DatasetMeta write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Validates every declared shape against file sizes. Throws DatasetFormatError.
Dataset read_dataset(const std::filesystem::path& dir);

/// Little-endian float32 blob helpers.
void write_f32(const std::filesystem::path& file, const std::vector<double>& values);
std::vector<double> read_f32(const std::filesystem::path& file);

}  // namespace p2p
