#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "affkit/errors.hpp"
#include "affkit/geometry.hpp"
#include "affkit/registration.hpp"

namespace affkit {

// A detected feature as written to frame files.
struct DetectedFeature {
  AffineFrame frame;
  double response = 0.0;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// 3x3 row-major whitespace-separated reals (HSequences / Oxford convention).
inline Homography load_homography(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open homography file");
  std::array<double, 9> h{};
  for (double& v : h)
    if (!(in >> v)) throw IoError(path, "expected 9 whitespace-separated reals");
  try {
    return Homography::from_array(h);
  } catch (const DegenerateFrame& e) {
    throw IoError(path, e.what());
  }
}

inline void save_homography(const Homography& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << (c ? " " : "") << format_real(h.h[r * 3 + c]);
    out << "\n";
  }
}

struct FrameFileStats {
  int detected = 0;
  int adapted = 0;
  int rejected_elongation = 0;
  int rejected_boundary = 0;
  int rejected_nonconvergence = 0;
};

// One line per feature: "x y a11 a12 a21 a22 response", plus a stats footer.
inline void write_frames(const std::vector<DetectedFeature>& feats,
                         const FrameFileStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  for (const DetectedFeature& f : feats) {
    out << format_real(f.frame.cx) << " " << format_real(f.frame.cy) << " "
        << format_real(f.frame.a11) << " " << format_real(f.frame.a12) << " "
        << format_real(f.frame.a21) << " " << format_real(f.frame.a22) << " "
        << format_real(f.response) << "\n";
  }
  out << "# detected=" << stats.detected << " adapted=" << stats.adapted
      << " rejected_elong=" << stats.rejected_elongation
      << " rejected_border=" << stats.rejected_boundary
      << " rejected_nonconv=" << stats.rejected_nonconvergence << "\n";
  if (!out) throw IoError(path, "write failed");
}

inline std::vector<DetectedFeature> read_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open frames file");
  std::vector<DetectedFeature> feats;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DetectedFeature f;
    if (!(ls >> f.frame.cx >> f.frame.cy >> f.frame.a11 >> f.frame.a12 >> f.frame.a21 >>
          f.frame.a22 >> f.response))
      throw IoError(path, "malformed frame line: " + line);
    feats.push_back(f);
  }
  return feats;
}

// Oxford ellipse format: "u v a b c" where [a b; b c] = (A A^T)^-1.
inline void write_frames_oxford(const std::vector<DetectedFeature>& feats,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "1.0\n" << feats.size() << "\n";
  for (const DetectedFeature& f : feats) {
    const Mat2 a = f.frame.shape();
    const Mat2 e = (a * a.transpose()).inverse();
    out << format_real(f.frame.cx) << " " << format_real(f.frame.cy) << " "
        << format_real(e.m11) << " " << format_real(0.5 * (e.m12 + e.m21)) << " "
        << format_real(e.m22) << "\n";
  }
  if (!out) throw IoError(path, "write failed");
}

// One feature per line: the frame fields followed by the descriptor values.
inline void write_descriptor_dump(const std::vector<DetectedFeature>& feats,
                                  const std::vector<Descriptor>& descs,
                                  const std::string& path) {
  if (feats.size() != descs.size())
    throw PreconditionError("write_descriptor_dump: feature/descriptor count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  for (size_t i = 0; i < feats.size(); ++i) {
    const DetectedFeature& f = feats[i];
    out << format_real(f.frame.cx) << " " << format_real(f.frame.cy) << " "
        << format_real(f.frame.a11) << " " << format_real(f.frame.a12) << " "
        << format_real(f.frame.a21) << " " << format_real(f.frame.a22) << " "
        << format_real(f.response);
    for (double v : descs[i].values) out << " " << format_real(v);
    out << "\n";
  }
  if (!out) throw IoError(path, "write failed");
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "step,loss,E,collapsed_frac,match_score\n";
  for (const TrajectoryRecord& r : traj)
    out << r.step << "," << format_real(r.loss) << "," << format_real(r.geometric_err)
        << "," << format_real(r.collapsed_frac) << "," << format_real(r.match_score)
        << "\n";
  if (!out) throw IoError(path, "write failed");
}

inline void write_toy_csv(const ToyResult& toy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "step,loss,mean_pos_dist,min_cross_dist\n";
  for (size_t k = 0; k < toy.steps.size(); ++k) {
    const ToyStep& st = toy.steps[k];
    out << k << "," << format_real(st.loss) << "," << format_real(mean_positive_distance(st))
        << "," << format_real(min_cross_pair_distance(st)) << "\n";
  }
  if (!out) throw IoError(path, "write failed");
}

inline void write_toy_points_csv(const ToyResult& toy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << "step,pair,side,x,y\n";
  for (size_t k = 0; k < toy.steps.size(); ++k) {
    const ToyStep& st = toy.steps[k];
    for (size_t i = 0; i < st.s.size(); ++i) {
      out << k << "," << i << ",s";
      for (double v : st.s[i]) out << "," << format_real(v);
      out << "\n" << k << "," << i << ",sdot";
      for (double v : st.sdot[i]) out << "," << format_real(v);
      out << "\n";
    }
  }
  if (!out) throw IoError(path, "write failed");
}

// HSequences-style directory: images named 1..6 (or img1..img6) with
// homographies H_1_k (or H1tokp) mapping image 1 to image k.
struct SequenceDir {
  std::string root;

  explicit SequenceDir(std::string root_) : root(std::move(root_)) {}

  std::optional<std::string> image_path(int index) const {
    namespace fs = std::filesystem;
    const std::array<std::string, 2> stems = {std::to_string(index),
                                              "img" + std::to_string(index)};
    const std::array<std::string, 3> exts = {".ppm", ".pgm", ".png"};
    for (const auto& stem : stems)
      for (const auto& ext : exts) {
        const fs::path p = fs::path(root) / (stem + ext);
        if (fs::exists(p)) return p.string();
      }
    return std::nullopt;
  }

  std::optional<std::string> homography_path(int index) const {
    namespace fs = std::filesystem;
    const std::array<std::string, 2> names = {"H_1_" + std::to_string(index),
                                              "H1to" + std::to_string(index) + "p"};
    for (const auto& name : names) {
      const fs::path p = fs::path(root) / name;
      if (fs::exists(p)) return p.string();
    }
    return std::nullopt;
  }

  // Indices >= 2 for which an image exists.
  std::vector<int> pair_indices() const {
    std::vector<int> out;
    for (int k = 2; k <= 6; ++k)
      if (image_path(k)) out.push_back(k);
    return out;
  }
};

}  // namespace affkit
