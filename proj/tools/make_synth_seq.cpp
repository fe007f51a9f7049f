// Generates a synthetic HSequences-style test sequence: a blob texture as
// image 1, an illumination-changed copy as image 2, and optionally a
// viewpoint-warped copy as image 3 with its ground-truth homography.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>

#include "affkit/image_io.hpp"
#include "affkit/io.hpp"
#include "affkit/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic sequence generator"};
  std::string out_dir = "synth_seq";
  int size = 256;
  std::uint64_t seed = 17;
  int blobs = 300;
  double sigma_min = 2.0;
  double sigma_max = 10.0;
  double gamma = 1.8;
  double gain = 0.35;
  double wavelength = 48.0;
  double warp_tilt = 1.25;
  double warp_rot_deg = 10.0;
  bool with_viewpoint = false;
  app.add_option("out", out_dir, "output directory");
  app.add_option("--size", size, "image side length");
  app.add_option("--seed", seed, "texture seed");
  app.add_option("--blobs", blobs, "number of texture blobs");
  app.add_option("--sigma-min", sigma_min, "smallest blob sigma");
  app.add_option("--sigma-max", sigma_max, "largest blob sigma");
  app.add_option("--gamma", gamma, "illumination gamma for image 2");
  app.add_option("--gain", gain, "illumination gain-field strength");
  app.add_option("--wavelength", wavelength, "illumination gain-field wavelength");
  app.add_flag("--viewpoint", with_viewpoint, "also write a warped image 3");
  app.add_option("--tilt", warp_tilt, "viewpoint tilt for image 3");
  app.add_option("--rot", warp_rot_deg, "viewpoint rotation (degrees) for image 3");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  try {
    fs::create_directories(out_dir);
    const affkit::GrayImage img1 =
        affkit::make_texture(size, size, seed, blobs, sigma_min, sigma_max);
    const affkit::GrayImage img2 = affkit::apply_illumination(img1, gamma, gain, wavelength);
    affkit::write_pgm(img1, (fs::path(out_dir) / "1.pgm").string());
    affkit::write_pgm(img2, (fs::path(out_dir) / "2.pgm").string());
    affkit::save_homography(affkit::Homography::identity(),
                            (fs::path(out_dir) / "H_1_2").string());
    if (with_viewpoint) {
      const double rot = warp_rot_deg * std::numbers::pi / 180.0;
      const affkit::Mat2 m =
          affkit::rotation(rot) * affkit::Mat2::diag(1.0 / warp_tilt, 1.0);
      const auto [img3, h13] = affkit::warp_affine(img1, m);
      affkit::write_pgm(img3, (fs::path(out_dir) / "3.pgm").string());
      affkit::save_homography(h13, (fs::path(out_dir) / "H_1_3").string());
    }
    std::cout << "wrote sequence to " << out_dir << "\n";
  } catch (const affkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
