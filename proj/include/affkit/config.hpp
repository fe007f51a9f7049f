#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "affkit/descriptor.hpp"
#include "affkit/detector.hpp"
#include "affkit/errors.hpp"
#include "affkit/registration.hpp"

namespace affkit {

enum class SampleFrom { Image, ScaleSpace };

inline const char* to_string(SampleFrom s) {
  return s == SampleFrom::Image ? "image" : "scalespace";
}
inline const char* to_string(Coupling c) {
  return c == Coupling::Coupled ? "coupled" : "independent";
}
inline const char* to_string(GradientMode g) {
  return g == GradientMode::Analytic ? "analytic" : "finitediff";
}

inline DescriptorKind parse_descriptor_kind(const std::string& s) {
  if (s == "sift") return DescriptorKind::SIFT;
  if (s == "rootsift") return DescriptorKind::RootSIFT;
  if (s == "rawpixels") return DescriptorKind::RawPixels;
  throw PreconditionError("unknown descriptor kind: " + s);
}
inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "posdist") return LossKind::PosDist;
  if (s == "hardneg") return LossKind::HardNeg;
  if (s == "hardnegc") return LossKind::HardNegC;
  throw PreconditionError("unknown loss kind: " + s);
}
inline Coupling parse_coupling(const std::string& s) {
  if (s == "coupled") return Coupling::Coupled;
  if (s == "independent") return Coupling::Independent;
  throw PreconditionError("unknown coupling: " + s);
}
inline GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "analytic") return GradientMode::Analytic;
  if (s == "finitediff") return GradientMode::FiniteDiff;
  throw PreconditionError("unknown gradient mode: " + s);
}
inline SampleFrom parse_sample_from(const std::string& s) {
  if (s == "image") return SampleFrom::Image;
  if (s == "scalespace") return SampleFrom::ScaleSpace;
  throw PreconditionError("unknown sample source: " + s);
}

// Every tunable of every module, serializable as JSON so runs are
// self-describing and reproducible.
struct RunConfig {
  // detection
  double detect_threshold = 1e-6;
  int levels_per_octave = 3;
  double initial_sigma = 1.6;
  int max_keypoints = 0;
  // affine adaptation
  int adapt_max_iter = 16;
  double adapt_convergence_ratio = 1.05;
  int adapt_window_size = 19;
  double adapt_window_radius = 3.0;
  double max_elongation = 6.0;
  // patches and descriptors
  int patch_size = 32;
  double mr_scale = 3.0;
  double max_clamped = 0.1;
  DescriptorKind descriptor = DescriptorKind::RootSIFT;
  SampleFrom sample_from = SampleFrom::Image;
  // registration
  LossKind loss = LossKind::HardNegC;
  Coupling coupling = Coupling::Coupled;
  int steps = 150;
  double lr = 0.005;
  double noise_tilt = 1.0;
  bool noise_rotation_tied = true;
  GradientMode gradient = GradientMode::Analytic;
  double fd_step = 1e-3;
  // toy experiment
  int toy_pairs = 5;
  int toy_steps = 150;
  double toy_lr = 0.01;
  // evaluation
  double ratio_threshold = 0.8;
  double px_threshold = 3.0;
  double overlap_threshold = 0.4;
  // shared
  std::uint64_t seed = 0;
  bool assume_identity = false;
  bool no_affine = false;

  DetectorParams detector_params() const {
    DetectorParams p;
    p.threshold = detect_threshold;
    p.max_keypoints = max_keypoints;
    return p;
  }
  AdaptParams adapt_params() const {
    AdaptParams p;
    p.max_iter = adapt_max_iter;
    p.convergence_ratio = adapt_convergence_ratio;
    p.window_size = adapt_window_size;
    p.window_radius = adapt_window_radius;
    p.max_elongation = max_elongation;
    return p;
  }
  RegistrationConfig registration_config() const {
    RegistrationConfig c;
    c.loss = loss;
    c.descriptor = descriptor;
    c.coupling = coupling;
    c.steps = steps;
    c.lr = lr;
    c.noise_tilt = noise_tilt;
    c.noise_rotation_tied = noise_rotation_tied;
    c.gradient = gradient;
    c.seed = seed;
    c.patch_size = patch_size;
    c.mr_scale = mr_scale;
    c.ratio_threshold = ratio_threshold;
    c.px_threshold = px_threshold;
    c.fd_step = fd_step;
    c.max_clamped = max_clamped;
    return c;
  }
  ToyConfig toy_config() const {
    ToyConfig c;
    c.n_pairs = toy_pairs;
    c.steps = toy_steps;
    c.loss = loss;
    c.lr = toy_lr;
    c.seed = seed;
    return c;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{
      {"detect_threshold", c.detect_threshold},
      {"levels_per_octave", c.levels_per_octave},
      {"initial_sigma", c.initial_sigma},
      {"max_keypoints", c.max_keypoints},
      {"adapt_max_iter", c.adapt_max_iter},
      {"adapt_convergence_ratio", c.adapt_convergence_ratio},
      {"adapt_window_size", c.adapt_window_size},
      {"adapt_window_radius", c.adapt_window_radius},
      {"max_elongation", c.max_elongation},
      {"patch_size", c.patch_size},
      {"mr_scale", c.mr_scale},
      {"max_clamped", c.max_clamped},
      {"descriptor", to_string(c.descriptor)},
      {"sample_from", to_string(c.sample_from)},
      {"loss", to_string(c.loss)},
      {"coupling", to_string(c.coupling)},
      {"steps", c.steps},
      {"lr", c.lr},
      {"noise_tilt", c.noise_tilt},
      {"noise_rotation_tied", c.noise_rotation_tied},
      {"gradient", to_string(c.gradient)},
      {"fd_step", c.fd_step},
      {"toy_pairs", c.toy_pairs},
      {"toy_steps", c.toy_steps},
      {"toy_lr", c.toy_lr},
      {"ratio_threshold", c.ratio_threshold},
      {"px_threshold", c.px_threshold},
      {"overlap_threshold", c.overlap_threshold},
      {"seed", c.seed},
      {"assume_identity", c.assume_identity},
      {"no_affine", c.no_affine},
  };
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.detect_threshold = j.value("detect_threshold", c.detect_threshold);
  c.levels_per_octave = j.value("levels_per_octave", c.levels_per_octave);
  c.initial_sigma = j.value("initial_sigma", c.initial_sigma);
  c.max_keypoints = j.value("max_keypoints", c.max_keypoints);
  c.adapt_max_iter = j.value("adapt_max_iter", c.adapt_max_iter);
  c.adapt_convergence_ratio = j.value("adapt_convergence_ratio", c.adapt_convergence_ratio);
  c.adapt_window_size = j.value("adapt_window_size", c.adapt_window_size);
  c.adapt_window_radius = j.value("adapt_window_radius", c.adapt_window_radius);
  c.max_elongation = j.value("max_elongation", c.max_elongation);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.mr_scale = j.value("mr_scale", c.mr_scale);
  c.max_clamped = j.value("max_clamped", c.max_clamped);
  if (j.contains("descriptor")) c.descriptor = parse_descriptor_kind(j["descriptor"]);
  if (j.contains("sample_from")) c.sample_from = parse_sample_from(j["sample_from"]);
  if (j.contains("loss")) c.loss = parse_loss_kind(j["loss"]);
  if (j.contains("coupling")) c.coupling = parse_coupling(j["coupling"]);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.noise_tilt = j.value("noise_tilt", c.noise_tilt);
  c.noise_rotation_tied = j.value("noise_rotation_tied", c.noise_rotation_tied);
  if (j.contains("gradient")) c.gradient = parse_gradient_mode(j["gradient"]);
  c.fd_step = j.value("fd_step", c.fd_step);
  c.toy_pairs = j.value("toy_pairs", c.toy_pairs);
  c.toy_steps = j.value("toy_steps", c.toy_steps);
  c.toy_lr = j.value("toy_lr", c.toy_lr);
  c.ratio_threshold = j.value("ratio_threshold", c.ratio_threshold);
  c.px_threshold = j.value("px_threshold", c.px_threshold);
  c.overlap_threshold = j.value("overlap_threshold", c.overlap_threshold);
  c.seed = j.value("seed", c.seed);
  c.assume_identity = j.value("assume_identity", c.assume_identity);
  c.no_affine = j.value("no_affine", c.no_affine);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, e.what());
  }
  return run_config_from_json(j);
}

inline void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << to_json(c).dump(2) << "\n";
}

}  // namespace affkit
