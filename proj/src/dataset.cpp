#include "p2p/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "p2p/errors.hpp"

namespace p2p {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
    throw DatasetFormatError("invalid sequence id '" + id + "'");
  }
}

std::vector<double> flatten(const std::vector<Matrix>& frames) {
  std::vector<double> out;
  for (const auto& m : frames) out.insert(out.end(), m.data(), m.data() + m.size());
  return out;
}

std::vector<Matrix> unflatten(const std::vector<double>& flat, std::size_t count, Eigen::Index rows, Eigen::Index cols,
                              const std::string& what) {
  const std::size_t per = static_cast<std::size_t>(rows * cols);
  if (flat.size() != count * per) {
    throw DatasetFormatError(what + ": expected " + std::to_string(count * per) + " floats, file has " +
                             std::to_string(flat.size()));
  }
  std::vector<Matrix> out;
  out.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    out.emplace_back(Eigen::Map<const Matrix>(flat.data() + f * per, rows, cols));
  }
  return out;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw DatasetFormatError(std::string("manifest missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DatasetFormatError(std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

void write_f32(const fs::path& file, const std::vector<double>& values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  for (double v : values) {
    const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("write failed for " + file.string());
}

std::vector<double> read_f32(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DatasetFormatError("cannot open " + file.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 4 != 0) throw DatasetFormatError(file.string() + " is not a float32 array");
  std::vector<double> out(bytes / 4);
  for (auto& v : out) {
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    v = static_cast<double>(std::bit_cast<float>(to_le(bits)));
  }
  return out;
}

DatasetMeta write_dataset(const fs::path& dir, const Dataset& dataset) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  DatasetMeta meta = dataset.meta;
  meta.version = kDatasetVersion;
  json manifest;
  manifest["version"] = meta.version;
  manifest["J"] = meta.num_joints;
  manifest["T"] = meta.window;
  manifest["N"] = meta.num_points;
  manifest["fps"] = meta.fps;
  manifest["parents"] = meta.parents;
  manifest["sequences"] = json::array();
  for (const auto& seq : dataset.sequences) {
    check_id(seq.id);
    seq.clouds.validate();
    seq.poses.validate();
    if (seq.clouds.size() != seq.poses.size()) throw DatasetFormatError("sequence " + seq.id + ": frame counts differ");
    if (seq.poses.num_joints() != meta.num_joints && !seq.poses.frames.empty()) {
      throw DatasetFormatError("sequence " + seq.id + ": joint count differs from manifest");
    }
    if (seq.clouds.num_points() != meta.num_points && !seq.clouds.frames.empty()) {
      throw DatasetFormatError("sequence " + seq.id + ": point count differs from manifest");
    }
    json rec;
    rec["id"] = seq.id;
    rec["frames"] = seq.frame_count();
    rec["points"] = "seq_" + seq.id + "_points.f32";
    rec["coords"] = "seq_" + seq.id + "_coords.f32";
    rec["rots"] = "seq_" + seq.id + "_rots.f32";
    write_f32(dir / rec["points"].get<std::string>(), flatten(seq.clouds.frames));
    std::vector<Matrix> coords, rots;
    for (const auto& f : seq.poses.frames) {
      coords.push_back(f.coords);
      rots.push_back(f.rots);
    }
    write_f32(dir / rec["coords"].get<std::string>(), flatten(coords));
    write_f32(dir / rec["rots"].get<std::string>(), flatten(rots));
    if (seq.depth) {
      const auto& d = *seq.depth;
      json dj;
      dj["file"] = "seq_" + seq.id + "_depth.f32";
      dj["background"] = "seq_" + seq.id + "_background.f32";
      dj["rows"] = d.background.rows();
      dj["cols"] = d.background.cols();
      dj["intrinsics"] = {d.intrinsics.fx, d.intrinsics.fy, d.intrinsics.cx, d.intrinsics.cy};
      dj["extrinsics"] = std::vector<double>(d.extrinsics.data(), d.extrinsics.data() + 16);
      write_f32(dir / dj["file"].get<std::string>(), flatten(d.frames));
      write_f32(dir / dj["background"].get<std::string>(), flatten({d.background}));
      rec["depth"] = dj;
    }
    manifest["sequences"].push_back(rec);
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
  return meta;
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DatasetFormatError("no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DatasetFormatError(std::string("corrupt manifest: ") + e.what());
  }
  Dataset ds;
  ds.meta.version = field<int>(manifest, "version");
  if (ds.meta.version != kDatasetVersion) throw DatasetFormatError("unsupported dataset version");
  ds.meta.num_joints = field<int>(manifest, "J");
  ds.meta.window = field<int>(manifest, "T");
  ds.meta.num_points = field<int>(manifest, "N");
  ds.meta.fps = field<double>(manifest, "fps");
  ds.meta.parents = field<std::vector<int>>(manifest, "parents");
  if (ds.meta.num_joints < 1 || ds.meta.num_points < 1 || ds.meta.window < 1) {
    throw DatasetFormatError("manifest declares non-positive shapes");
  }
  if (static_cast<int>(ds.meta.parents.size()) != ds.meta.num_joints) {
    throw DatasetFormatError("manifest parents list does not match J");
  }
  const auto records = field<json>(manifest, "sequences");
  if (!records.is_array()) throw DatasetFormatError("manifest 'sequences' must be an array");
  const int J = ds.meta.num_joints;
  const int N = ds.meta.num_points;
  for (const auto& rec : records) {
    SequenceRecord seq;
    seq.id = field<std::string>(rec, "id");
    check_id(seq.id);
    const int frames = field<int>(rec, "frames");
    if (frames < 0) throw DatasetFormatError("negative frame count");
    const auto n = static_cast<std::size_t>(frames);
    seq.clouds.frames = unflatten(read_f32(dir / field<std::string>(rec, "points")), n, N, 3, seq.id + " points");
    const auto coords = unflatten(read_f32(dir / field<std::string>(rec, "coords")), n, J, 3, seq.id + " coords");
    const auto rots = unflatten(read_f32(dir / field<std::string>(rec, "rots")), n, J, 6, seq.id + " rots");
    for (std::size_t f = 0; f < n; ++f) seq.poses.frames.push_back({coords[f], rots[f]});
    if (rec.contains("depth")) {
      const auto& dj = rec.at("depth");
      DepthFrames d;
      const int rows = field<int>(dj, "rows");
      const int cols = field<int>(dj, "cols");
      d.frames = unflatten(read_f32(dir / field<std::string>(dj, "file")), n, rows, cols, seq.id + " depth");
      d.background = unflatten(read_f32(dir / field<std::string>(dj, "background")), 1, rows, cols, "background")[0];
      const auto k = field<std::vector<double>>(dj, "intrinsics");
      const auto e = field<std::vector<double>>(dj, "extrinsics");
      if (k.size() != 4 || e.size() != 16) throw DatasetFormatError("bad camera parameters");
      d.intrinsics = {k[0], k[1], k[2], k[3]};
      std::memcpy(d.extrinsics.data(), e.data(), 16 * sizeof(double));
      seq.depth = std::move(d);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace p2p
