#include "p2p/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

Matrix unflat(const std::vector<double>& v, int cols) {
  if (cols <= 0 || v.size() % cols != 0) throw IoError("report pose has a bad length");
  Matrix m(static_cast<Eigen::Index>(v.size() / cols), cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string report_json(const RolloutReport& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    frames.push_back({{"frame", f.frame}, {"mpjpe_mm", f.mpjpe_mm}, {"angular_deg", f.angular_deg}, {"history", f.history}});
  }
  json poses = json::array();
  for (std::size_t k = 0; k < r.predictions.size(); ++k) {
    poses.push_back({{"pred_coords", flat(r.predictions[k].coords)},
                     {"pred_rots", flat(r.predictions[k].rots)},
                     {"gt_coords", flat(r.ground_truth[k].coords)},
                     {"gt_rots", flat(r.ground_truth[k].rots)}});
  }
  json j = {{"sequence", r.sequence},
            {"scenario", r.scenario},
            {"mode", r.mode},
            {"init", r.init},
            {"window", r.window},
            {"points", r.points},
            {"frame_count", r.frames.size()},
            {"mean_mpjpe_mm", r.mean_mpjpe_mm},
            {"mean_angular_deg", r.mean_angular_deg},
            {"parents", r.parents},
            {"frames", frames},
            {"poses", poses}};
  return j.dump(2) + "\n";
}

RolloutReport parse_report_json(const std::string& text) {
  RolloutReport r;
  try {
    const json j = json::parse(text);
    r.sequence = j.at("sequence").get<std::string>();
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.init = j.at("init").get<std::string>();
    r.window = j.at("window").get<int>();
    r.points = j.at("points").get<int>();
    r.mean_mpjpe_mm = j.at("mean_mpjpe_mm").get<double>();
    r.mean_angular_deg = j.at("mean_angular_deg").get<double>();
    r.parents = j.at("parents").get<std::vector<int>>();
    for (const auto& f : j.at("frames")) {
      r.frames.push_back({f.at("frame").get<int>(), f.at("mpjpe_mm").get<double>(), f.at("angular_deg").get<double>(),
                          f.at("history").get<std::string>()});
    }
    for (const auto& p : j.at("poses")) {
      r.predictions.push_back({unflat(p.at("pred_coords").get<std::vector<double>>(), kCoordDims),
                               unflat(p.at("pred_rots").get<std::vector<double>>(), kRotDims)});
      r.ground_truth.push_back({unflat(p.at("gt_coords").get<std::vector<double>>(), kCoordDims),
                                unflat(p.at("gt_rots").get<std::vector<double>>(), kRotDims)});
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

RolloutReport read_report(const fs::path& metrics_json) {
  std::ifstream in(metrics_json, std::ios::binary);
  if (!in) throw IoError("cannot read " + metrics_json.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report_json(ss.str());
}

std::string report_table(const RolloutReport& r) {
  std::ostringstream o;
  char line[128];
  std::snprintf(line, sizeof line, "%6s  %-10s  %12s  %12s\n", "frame", "history", "mpjpe_mm", "angular_deg");
  o << line;
  for (const auto& f : r.frames) {
    std::snprintf(line, sizeof line, "%6d  %-10s  %12.3f  %12.3f\n", f.frame, f.history.c_str(), f.mpjpe_mm,
                  f.angular_deg);
    o << line;
  }
  if (!r.frames.empty()) {
    std::snprintf(line, sizeof line, "%6s  %-10s  %12.3f  %12.3f\n", "mean", "", r.mean_mpjpe_mm, r.mean_angular_deg);
    o << line;
  }
  return o.str();
}

std::string metric_plot_svg(const RolloutReport& r, bool angular) {
  const double W = 640, H = 320, L = 60, R = 20, T = 30, B = 40;
  std::vector<double> xs, ys;
  for (const auto& f : r.frames) {
    xs.push_back(f.frame);
    ys.push_back(angular ? f.angular_deg : f.mpjpe_mm);
  }
  const double x0 = xs.empty() ? 0 : xs.front(), x1 = xs.empty() ? 1 : std::max(xs.back(), x0 + 1);
  const double y1 = ys.empty() ? 1 : std::max(*std::max_element(ys.begin(), ys.end()) * 1.1, 1e-9);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - y / y1 * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << (angular ? "Angular error (deg)" : "MPJPE (mm)") << " per frame, " << r.scenario << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << L - 5 << "\" y=\"" << T + 5 << "\" text-anchor=\"end\" font-size=\"10\">" << num(y1)
    << "</text>\n"
    << "<text x=\"" << L - 5 << "\" y=\"" << H - B << "\" text-anchor=\"end\" font-size=\"10\">0</text>\n"
    << "<text x=\"" << L << "\" y=\"" << H - B + 15 << "\" font-size=\"10\">" << x0 << "</text>\n"
    << "<text x=\"" << W - R << "\" y=\"" << H - B + 15 << "\" text-anchor=\"end\" font-size=\"10\">" << x1
    << "</text>\n";
  if (!xs.empty()) {
    o << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < xs.size(); ++k) o << num(px(xs[k])) << "," << num(py(ys[k])) << " ";
    o << "\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string skeleton_svg(const PoseFrame& pred, const PoseFrame& gt, const std::vector<int>& parents, int frame) {
  const double panel = 300, pad = 20, scale = 120;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * panel << "\" height=\"" << panel + pad << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << panel << "\" y=\"15\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">frame "
    << frame << ": ground truth (grey) and prediction (red), front and side</text>\n";
  auto draw = [&](const PoseFrame& p, const char* color, int axis_u, double offset) {
    const Eigen::RowVector3d root = p.coords.row(0);
    for (int j = 0; j < p.num_joints(); ++j) {
      const int par = j < static_cast<int>(parents.size()) ? parents[j] : -1;
      auto u = [&](int k) { return offset + panel / 2 + (p.coords(k, axis_u) - root(axis_u)) * scale; };
      auto v = [&](int k) { return pad + panel / 2 - (p.coords(k, 1) - root(1)) * scale; };
      o << "<circle cx=\"" << num(u(j)) << "\" cy=\"" << num(v(j)) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
      if (par >= 0 && par < p.num_joints()) {
        o << "<line x1=\"" << num(u(par)) << "\" y1=\"" << num(v(par)) << "\" x2=\"" << num(u(j)) << "\" y2=\""
          << num(v(j)) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      }
    }
  };
  draw(gt, "#999999", 0, 0);
  draw(pred, "#c0392b", 0, 0);
  draw(gt, "#999999", 2, panel);
  draw(pred, "#c0392b", 2, panel);
  o << "</svg>\n";
  return o.str();
}

void emit_report(const RolloutReport& r, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create report directory " + out_dir.string());
  write_file(out_dir / "metrics.json", report_json(r));
  write_file(out_dir / "timing.json", json{{"wall_seconds", r.wall_seconds}}.dump(2) + "\n");
  write_file(out_dir / "metrics.txt", report_table(r));
  write_file(out_dir / "mpjpe.svg", metric_plot_svg(r, false));
  write_file(out_dir / "angular.svg", metric_plot_svg(r, true));
  if (r.predictions.empty()) return;
  const std::size_t n = r.predictions.size();
  std::vector<std::size_t> picks{0, n / 2, n - 1};
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
  for (std::size_t k : picks) {
    const int frame = k < r.frames.size() ? r.frames[k].frame : static_cast<int>(k);
    char name[48];
    std::snprintf(name, sizeof name, "skeleton_%04d.svg", frame);
    write_file(out_dir / name, skeleton_svg(r.predictions[k], r.ground_truth[k], r.parents, frame));
  }
}

}  // namespace p2p
