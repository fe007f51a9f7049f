// Command-line surface for the affine local-feature toolkit: detection with
// Baumberg adaptation, descriptor-driven shape registration, the toy loss
// optimization, and the repeatability/matching evaluation protocols.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "affkit/config.hpp"
#include "affkit/descriptor.hpp"
#include "affkit/detector.hpp"
#include "affkit/eval.hpp"
#include "affkit/image_io.hpp"
#include "affkit/io.hpp"
#include "affkit/registration.hpp"
#include "affkit/svg.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitEmpty = 2;

struct FlagOverrides {
  CLI::App* cmd = nullptr;
  std::string config_path;
  std::string descriptor, loss, gradient, sample_from;
  bool coupled = false, independent = false;
  affkit::RunConfig staged;

  void add_common(CLI::App* c) {
    cmd = c;
    c->add_option("--seed", staged.seed, "RNG seed");
    c->add_option("--config", config_path, "JSON config file with defaults for all tunables");
    c->add_option("--descriptor", descriptor, "sift|rootsift|rawpixels");
    c->add_option("--loss", loss, "posdist|hardneg|hardnegc");
    c->add_option("--ratio", staged.ratio_threshold, "ratio-test threshold");
    c->add_option("--overlap-threshold", staged.overlap_threshold, "overlap-error threshold");
    c->add_option("--px-threshold", staged.px_threshold, "reprojection correctness threshold");
    c->add_flag("--assume-identity", staged.assume_identity,
                "treat missing homographies as identity");
    c->add_flag("--no-affine", staged.no_affine, "skip affine adaptation, keep circles");
    c->add_option("--patch-size", staged.patch_size, "descriptor patch size");
    c->add_option("--mr-scale", staged.mr_scale, "measurement region scale");
    c->add_option("--sample-from", sample_from, "image|scalespace");
    c->add_option("--threshold", staged.detect_threshold, "Hessian response threshold");
    c->add_option("--max-keypoints", staged.max_keypoints, "keep strongest N keypoints (0 = all)");
    c->add_option("--steps", staged.steps, "optimization steps");
    c->add_option("--lr", staged.lr, "Adam learning rate");
    c->add_option("--noise", staged.noise_tilt, "initial shape noise (max tilt, <= 1 disables)");
    c->add_option("--grad", gradient, "analytic|finitediff");
    c->add_flag("--coupled", coupled, "one shape per pair shared by both images");
    c->add_flag("--independent", independent, "separate shapes per image");
    c->add_option("--toy-pairs", staged.toy_pairs, "toy experiment pair count");
    c->add_option("--toy-steps", staged.toy_steps, "toy experiment step count");
    c->add_option("--toy-lr", staged.toy_lr, "toy experiment learning rate");
  }

  // Config file first, explicit flags override.
  affkit::RunConfig resolve() const {
    affkit::RunConfig cfg;
    if (!config_path.empty()) cfg = affkit::load_run_config(config_path);
    auto given = [&](const char* name) { return cmd->count(name) > 0; };
    if (given("--seed")) cfg.seed = staged.seed;
    if (!descriptor.empty()) cfg.descriptor = affkit::parse_descriptor_kind(descriptor);
    if (!loss.empty()) cfg.loss = affkit::parse_loss_kind(loss);
    if (given("--ratio")) cfg.ratio_threshold = staged.ratio_threshold;
    if (given("--overlap-threshold")) cfg.overlap_threshold = staged.overlap_threshold;
    if (given("--px-threshold")) cfg.px_threshold = staged.px_threshold;
    if (given("--assume-identity")) cfg.assume_identity = staged.assume_identity;
    if (given("--no-affine")) cfg.no_affine = staged.no_affine;
    if (given("--patch-size")) cfg.patch_size = staged.patch_size;
    if (given("--mr-scale")) cfg.mr_scale = staged.mr_scale;
    if (!sample_from.empty()) cfg.sample_from = affkit::parse_sample_from(sample_from);
    if (given("--threshold")) cfg.detect_threshold = staged.detect_threshold;
    if (given("--max-keypoints")) cfg.max_keypoints = staged.max_keypoints;
    if (given("--steps")) cfg.steps = staged.steps;
    if (given("--lr")) cfg.lr = staged.lr;
    if (given("--noise")) cfg.noise_tilt = staged.noise_tilt;
    if (!gradient.empty()) cfg.gradient = affkit::parse_gradient_mode(gradient);
    if (coupled) cfg.coupling = affkit::Coupling::Coupled;
    if (independent) cfg.coupling = affkit::Coupling::Independent;
    if (given("--toy-pairs")) cfg.toy_pairs = staged.toy_pairs;
    if (given("--toy-steps")) cfg.toy_steps = staged.toy_steps;
    if (given("--toy-lr")) cfg.toy_lr = staged.toy_lr;
    return cfg;
  }
};

void write_sidecar(const affkit::RunConfig& cfg, const std::string& out_path) {
  affkit::save_run_config(cfg, out_path + ".config.json");
}

struct DetectionResult {
  std::vector<affkit::DetectedFeature> features;
  affkit::FrameFileStats stats;
  affkit::ScaleSpace scale_space;
};

DetectionResult detect_and_adapt(const affkit::GrayImage& img, const affkit::RunConfig& cfg) {
  DetectionResult res;
  res.scale_space = affkit::build_pyramid(img, cfg.levels_per_octave, cfg.initial_sigma);
  const std::vector<affkit::Keypoint> kps =
      affkit::hessian_detect(res.scale_space, cfg.detector_params());
  res.stats.detected = static_cast<int>(kps.size());
  if (cfg.no_affine) {
    for (const affkit::Keypoint& kp : kps) {
      res.features.push_back(
          {affkit::AffineFrame::from({kp.x, kp.y}, affkit::Mat2::identity() * kp.sigma),
           kp.response});
      ++res.stats.adapted;
    }
    return res;
  }
  const affkit::AdaptParams par = cfg.adapt_params();
  for (const affkit::Keypoint& kp : kps) {
    const affkit::AdaptationResult r = affkit::baumberg_adapt(res.scale_space, kp, par);
    switch (r.outcome) {
      case affkit::AdaptationOutcome::Converged:
        res.features.push_back({r.frame, kp.response});
        ++res.stats.adapted;
        break;
      case affkit::AdaptationOutcome::RejectedElongation:
        ++res.stats.rejected_elongation;
        break;
      case affkit::AdaptationOutcome::RejectedBoundary:
        ++res.stats.rejected_boundary;
        break;
      case affkit::AdaptationOutcome::RejectedNonConvergence:
        ++res.stats.rejected_nonconvergence;
        break;
    }
  }
  return res;
}

// Image the descriptors are sampled from: the original image, or the base
// scale-space level (blurred to initial_sigma) when --sample-from scalespace.
const affkit::GrayImage& sampling_image(const affkit::GrayImage& img,
                                        const DetectionResult& det,
                                        const affkit::RunConfig& cfg) {
  if (cfg.sample_from == affkit::SampleFrom::ScaleSpace && !det.scale_space.octaves.empty())
    return det.scale_space.octaves.front().front().image;
  return img;
}

// Rotates the frame so the dominant gradient direction of its patch is zero.
affkit::AffineFrame orient_frame(const affkit::GrayImage& img, const affkit::AffineFrame& f,
                                 const affkit::RunConfig& cfg) {
  const affkit::Patch p = affkit::sample_patch(img, f, cfg.patch_size, cfg.mr_scale);
  const affkit::DominantOrientation ori = affkit::dominant_orientation(p);
  if (ori.degenerate) return f;
  affkit::AffineFrame out = f;
  out.set_shape(f.shape() * affkit::rotation(-ori.angle));
  return out;
}

std::vector<affkit::Descriptor> describe_frames(const affkit::GrayImage& img,
                                                std::vector<affkit::AffineFrame>& frames,
                                                const affkit::RunConfig& cfg,
                                                bool orient) {
  std::vector<affkit::Descriptor> descs;
  for (affkit::AffineFrame& f : frames) {
    if (orient) f = orient_frame(img, f, cfg);
    const affkit::Patch raw = affkit::sample_patch(img, f, cfg.patch_size, cfg.mr_scale);
    switch (cfg.descriptor) {
      case affkit::DescriptorKind::RawPixels:
        descs.push_back(affkit::raw_pixel_descriptor(affkit::normalize_patch(raw)));
        break;
      case affkit::DescriptorKind::SIFT:
        descs.push_back(affkit::sift_descriptor(raw));
        break;
      case affkit::DescriptorKind::RootSIFT:
        descs.push_back(affkit::rootsift(affkit::sift_descriptor(raw)));
        break;
    }
  }
  return descs;
}

affkit::Homography sequence_homography(const affkit::SequenceDir& seq, int index,
                                       const affkit::RunConfig& cfg) {
  const auto hp = seq.homography_path(index);
  if (hp) return affkit::load_homography(*hp);
  if (cfg.assume_identity) return affkit::Homography::identity();
  throw affkit::EmptyExperiment("missing homography for pair " + std::to_string(index) +
                                " (pass --assume-identity to default to identity)");
}

int cmd_detect(const std::string& image_path, const std::string& out,
               const std::string& oxford_out, const std::string& desc_out,
               const affkit::RunConfig& cfg) {
  const affkit::GrayImage img = affkit::load_image(image_path);
  DetectionResult det = detect_and_adapt(img, cfg);
  affkit::write_frames(det.features, det.stats, out);
  write_sidecar(cfg, out);
  if (!oxford_out.empty()) affkit::write_frames_oxford(det.features, oxford_out);
  if (!desc_out.empty()) {
    std::vector<affkit::AffineFrame> frames;
    for (const auto& f : det.features) frames.push_back(f.frame);
    const affkit::GrayImage& simg = sampling_image(img, det, cfg);
    const std::vector<affkit::Descriptor> descs = describe_frames(simg, frames, cfg, true);
    std::vector<affkit::DetectedFeature> oriented;
    for (size_t i = 0; i < frames.size(); ++i)
      oriented.push_back({frames[i], det.features[i].response});
    affkit::write_descriptor_dump(oriented, descs, desc_out);
  }
  std::cout << "detected=" << det.stats.detected << " adapted=" << det.stats.adapted
            << " -> " << out << "\n";
  return kExitOk;
}

int cmd_toy(const std::string& out, const std::string& svg_out, const affkit::RunConfig& cfg) {
  const affkit::ToyResult toy = affkit::toy_experiment(cfg.toy_config());
  affkit::write_toy_csv(toy, out);
  const std::string points_path =
      (std::filesystem::path(out).parent_path() /
       (std::filesystem::path(out).stem().string() + "_points.csv"))
          .string();
  affkit::write_toy_points_csv(toy, points_path);
  write_sidecar(cfg, out);
  if (!svg_out.empty())
    affkit::write_toy_svg(toy, std::string("toy optimization, ") + to_string(cfg.loss), svg_out);
  std::cout << "toy " << to_string(cfg.loss) << ": mean positive distance "
            << affkit::mean_positive_distance(toy.steps.front()) << " -> "
            << affkit::mean_positive_distance(toy.steps.back()) << "\n";
  return kExitOk;
}

int cmd_register(const std::string& seq_root, int pair_index, const std::string& out,
                 const std::string& svg_out, const affkit::RunConfig& cfg) {
  const affkit::SequenceDir seq(seq_root);
  const auto ref_path = seq.image_path(1);
  const auto tgt_path = seq.image_path(pair_index);
  if (!ref_path || !tgt_path)
    throw affkit::IoError(seq_root, "sequence is missing image 1 or image " +
                                        std::to_string(pair_index));
  const affkit::GrayImage img_ref = affkit::load_image(*ref_path);
  const affkit::GrayImage img_tgt = affkit::load_image(*tgt_path);
  const affkit::Homography h = sequence_homography(seq, pair_index, cfg);

  DetectionResult det = detect_and_adapt(img_ref, cfg);
  if (det.features.empty())
    throw affkit::EmptyExperiment("no adapted features detected in reference image");
  std::vector<affkit::AffineFrame> frames;
  for (const auto& f : det.features) frames.push_back(f.frame);

  DetectionResult det_tgt;  // only used to pick the sampling image
  const affkit::GrayImage& sref = sampling_image(img_ref, det, cfg);
  const affkit::GrayImage& stgt =
      cfg.sample_from == affkit::SampleFrom::ScaleSpace
          ? (det_tgt = detect_and_adapt(img_tgt, cfg), sampling_image(img_tgt, det_tgt, cfg))
          : img_tgt;

  const affkit::Trajectory traj =
      affkit::register_shapes(sref, stgt, h, frames, cfg.registration_config());
  affkit::write_trajectory_csv(traj, out);
  write_sidecar(cfg, out);
  if (!svg_out.empty()) {
    std::vector<affkit::SvgSeries> series(4);
    series[0].name = "loss";
    series[1].name = "E";
    series[2].name = "collapsed";
    series[3].name = "match";
    for (const affkit::TrajectoryRecord& r : traj) {
      series[0].values.push_back(r.loss);
      series[1].values.push_back(r.geometric_err);
      series[2].values.push_back(r.collapsed_frac);
      series[3].values.push_back(r.match_score);
    }
    affkit::write_line_chart(series, std::string("registration, ") + to_string(cfg.loss),
                             svg_out);
  }
  std::cout << "registered " << frames.size() << " frames, match score "
            << traj.front().match_score << " -> " << traj.back().match_score << "\n";
  return kExitOk;
}

json repeatability_json(const affkit::RepeatabilityReport& rep) {
  return json{{"n_correspondences", rep.n_correspondences},
              {"repeatability", rep.repeatability},
              {"n_common_a", rep.n_common_a},
              {"n_common_b", rep.n_common_b}};
}

int cmd_repeat(const std::string& seq_root, const std::string& out,
               const affkit::RunConfig& cfg) {
  const affkit::SequenceDir seq(seq_root);
  const auto ref_path = seq.image_path(1);
  if (!ref_path) throw affkit::IoError(seq_root, "sequence is missing image 1");
  const std::vector<int> indices = seq.pair_indices();
  if (indices.empty())
    throw affkit::EmptyExperiment("sequence has no pair images (2..6)");

  const affkit::GrayImage img_ref = affkit::load_image(*ref_path);
  DetectionResult det_ref = detect_and_adapt(img_ref, cfg);

  json pairs = json::array();
  std::vector<double> reps;
  std::vector<double> corrs;
  affkit::OverlapOptions overlap_opts;
  for (int k : indices) {
    const affkit::GrayImage img_k = affkit::load_image(*seq.image_path(k));
    const affkit::Homography h = sequence_homography(seq, k, cfg);
    DetectionResult det_k = detect_and_adapt(img_k, cfg);
    std::vector<affkit::AffineFrame> fa, fb;
    for (const auto& f : det_ref.features) fa.push_back(f.frame);
    for (const auto& f : det_k.features) fb.push_back(f.frame);
    const affkit::RepeatabilityReport rep =
        affkit::repeatability(fa, fb, h, img_k.width, img_k.height, img_ref.width,
                              img_ref.height, cfg.overlap_threshold, overlap_opts);
    json entry = repeatability_json(rep);
    entry["pair"] = k;
    pairs.push_back(entry);
    reps.push_back(rep.repeatability);
    corrs.push_back(rep.n_correspondences);
  }
  auto mean = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
  };
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  json report{{"pairs", pairs},
              {"aggregate",
               {{"mean_repeatability", mean(reps)},
                {"median_repeatability", median(reps)},
                {"mean_correspondences", mean(corrs)},
                {"median_correspondences", median(corrs)}}}};
  std::ofstream f(out);
  if (!f) throw affkit::IoError(out, "cannot open file for writing");
  f << report.dump(2) << "\n";
  write_sidecar(cfg, out);
  std::cout << "repeatability (mean over " << indices.size()
            << " pairs): " << mean(reps) << " -> " << out << "\n";
  return kExitOk;
}

int cmd_match(const std::string& image_a, const std::string& image_b,
              const std::string& h_path, const std::string& out,
              const affkit::RunConfig& cfg) {
  const affkit::GrayImage img_a = affkit::load_image(image_a);
  const affkit::GrayImage img_b = affkit::load_image(image_b);
  affkit::Homography h;
  if (!h_path.empty())
    h = affkit::load_homography(h_path);
  else if (!cfg.assume_identity)
    throw affkit::EmptyExperiment("no homography given (pass --homography or --assume-identity)");

  DetectionResult det_a = detect_and_adapt(img_a, cfg);
  DetectionResult det_b = detect_and_adapt(img_b, cfg);
  if (det_a.features.empty() || det_b.features.empty())
    throw affkit::EmptyExperiment("no adapted features in one of the images");

  std::vector<affkit::AffineFrame> fa, fb;
  for (const auto& f : det_a.features) fa.push_back(f.frame);
  for (const auto& f : det_b.features) fb.push_back(f.frame);
  const std::vector<affkit::Descriptor> da =
      describe_frames(sampling_image(img_a, det_a, cfg), fa, cfg, true);
  const std::vector<affkit::Descriptor> db =
      describe_frames(sampling_image(img_b, det_b, cfg), fb, cfg, true);

  const std::vector<affkit::Match> matches =
      affkit::match_ratio_test(da, db, cfg.ratio_threshold);
  const int correct =
      affkit::count_correct_matches(matches, fa, fb, h, cfg.px_threshold);
  const double score =
      affkit::matching_score(fa, fb, da, db, h, img_b.width, img_b.height, img_a.width,
                             img_a.height, cfg.ratio_threshold, cfg.px_threshold);
  const affkit::RepeatabilityReport rep =
      affkit::repeatability(fa, fb, h, img_b.width, img_b.height, img_a.width,
                            img_a.height, cfg.overlap_threshold);

  json report = repeatability_json(rep);
  report["n_matches"] = matches.size();
  report["n_correct"] = correct;
  report["matching_score"] = score;
  std::ofstream f(out);
  if (!f) throw affkit::IoError(out, "cannot open file for writing");
  f << report.dump(2) << "\n";
  write_sidecar(cfg, out);
  std::cout << "matches=" << matches.size() << " correct=" << correct
            << " matching_score=" << score << " -> " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"affine local-feature toolkit"};
  app.require_subcommand(1);

  // detect
  auto* detect = app.add_subcommand("detect", "detect Hessian features and adapt affine shapes");
  std::string detect_image, detect_out = "frames.txt", detect_oxford, detect_desc;
  detect->add_option("image", detect_image, "input image (PGM/PPM/PNG)")->required();
  detect->add_option("--out", detect_out, "output frames file");
  detect->add_option("--oxford", detect_oxford, "also write Oxford-format ellipses here");
  detect->add_option("--dump-descriptors", detect_desc, "also write a descriptor dump here");
  FlagOverrides detect_flags;
  detect_flags.add_common(detect);

  // register
  auto* reg = app.add_subcommand("register", "descriptor-driven affine shape registration");
  std::string reg_seq, reg_out = "trajectory.csv", reg_svg;
  int reg_pair = 2;
  reg->add_option("sequence", reg_seq, "HSequences/Oxford-style sequence directory")->required();
  reg->add_option("--pair", reg_pair, "pair index (2..6)");
  reg->add_option("--out", reg_out, "trajectory CSV path");
  reg->add_option("--svg", reg_svg, "optional SVG line plot");
  FlagOverrides reg_flags;
  reg_flags.add_common(reg);

  // toy
  auto* toy = app.add_subcommand("toy", "2-D point-pair loss optimization");
  std::string toy_out = "toy.csv", toy_svg;
  toy->add_option("--out", toy_out, "trajectory CSV path");
  toy->add_option("--svg", toy_svg, "optional SVG trajectory plot");
  FlagOverrides toy_flags;
  toy_flags.add_common(toy);

  // repeat
  auto* repeat = app.add_subcommand("repeat", "repeatability over a sequence");
  std::string repeat_seq, repeat_out = "repeat.json";
  repeat->add_option("sequence", repeat_seq, "sequence directory")->required();
  repeat->add_option("--out", repeat_out, "JSON report path");
  FlagOverrides repeat_flags;
  repeat_flags.add_common(repeat);

  // match
  auto* match = app.add_subcommand("match", "full matching pipeline on an image pair");
  std::string match_a, match_b, match_h, match_out = "match.json";
  match->add_option("image_a", match_a, "first image")->required();
  match->add_option("image_b", match_b, "second image")->required();
  match->add_option("--homography", match_h, "homography file mapping a to b");
  match->add_option("--out", match_out, "JSON report path");
  FlagOverrides match_flags;
  match_flags.add_common(match);

  CLI11_PARSE(app, argc, argv);

  try {
    if (detect->parsed())
      return cmd_detect(detect_image, detect_out, detect_oxford, detect_desc,
                        detect_flags.resolve());
    if (reg->parsed())
      return cmd_register(reg_seq, reg_pair, reg_out, reg_svg, reg_flags.resolve());
    if (toy->parsed()) return cmd_toy(toy_out, toy_svg, toy_flags.resolve());
    if (repeat->parsed()) return cmd_repeat(repeat_seq, repeat_out, repeat_flags.resolve());
    if (match->parsed())
      return cmd_match(match_a, match_b, match_h, match_out, match_flags.resolve());
  } catch (const affkit::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const affkit::EmptyExperiment& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmpty;
  } catch (const affkit::BatchTooSmall& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmpty;
  } catch (const affkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
