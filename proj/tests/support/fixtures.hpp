#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "signspell/landmarks.hpp"
#include "signspell/neuralnet.hpp"
#include "signspell/random.hpp"
#include "signspell/training.hpp"

namespace signspell::testing {

/// Anchor for label k on the wrist x coordinate: k / 28.
inline double anchor(std::size_t k) { return static_cast<double>(k) / 28.0; }

/// Single affine layer whose logits are 2*t_k*x0 - t_k^2, i.e. -(x0 - t_k)^2
/// up to a per-frame constant, so the prediction is the label whose anchor is
/// nearest the wrist x coordinate.
inline Model anchor_model() {
  Model model({kFeatureDim, kNumLabels}, default_vocabulary(kNumLabels));
  LayerParams& layer = model.mutable_layers()[0];
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    layer.w(k, 0) = 2.0 * anchor(k);
    layer.bias[k] = -anchor(k) * anchor(k);
  }
  return model;
}

/// A frame the anchor model classifies as `label`; other coordinates are
/// filler drawn from `rng`.
inline LandmarkFrame frame_for(Label label, Rng& rng) {
  LandmarkFrame frame;
  for (Joint& p : frame.joints) p = {uniform01(rng), uniform01(rng), uniform01(rng) - 0.5};
  frame.joints[0].x = anchor(label.index());
  frame.hand = uniform01(rng) < 0.5 ? Handedness::kLeft : Handedness::kRight;
  return frame;
}

inline LandmarkFrame frame_for(Label label) {
  Rng rng(label.index() + 1);
  return frame_for(label, rng);
}

inline LandmarkFrame random_frame(Rng& rng) {
  LandmarkFrame frame;
  for (Joint& p : frame.joints) p = {uniform01(rng), uniform01(rng), uniform01(rng) - 0.5};
  frame.hand = uniform01(rng) < 0.5 ? Handedness::kLeft : Handedness::kRight;
  return frame;
}

struct ClusterData {
  std::vector<LabeledFrame> train;
  std::vector<LabeledFrame> validation;
  std::vector<LabeledFrame> test;
  double min_center_distance = 0.0;
};

/// One Gaussian cluster per label in feature space. Centers have 63 coordinates
/// uniform in [0,1] plus a fair-coin handedness bit, pairwise distance >= 1;
/// samples add N(0, sigma^2) to each coordinate and keep the center's bit.
inline ClusterData gaussian_clusters(std::size_t train_per_class, std::size_t val_per_class,
                                     std::size_t test_per_class, double sigma, std::uint64_t seed,
                                     double min_distance = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, sigma);

  std::vector<std::array<double, kFeatureDim>> centers;
  while (centers.size() < kNumLabels) {
    std::array<double, kFeatureDim> c{};
    for (std::size_t i = 0; i < kNumCoords; ++i) c[i] = unit(rng);
    c[kNumCoords] = unit(rng) < 0.5 ? 0.0 : 1.0;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& other : centers) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < kFeatureDim; ++i) d2 += (c[i] - other[i]) * (c[i] - other[i]);
      nearest = std::min(nearest, std::sqrt(d2));
    }
    if (nearest < min_distance) continue;
    centers.push_back(c);
  }
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centers.size(); ++a) {
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < kFeatureDim; ++i) {
        d2 += (centers[a][i] - centers[b][i]) * (centers[a][i] - centers[b][i]);
      }
      closest = std::min(closest, std::sqrt(d2));
    }
  }

  const auto sample = [&](std::size_t k) {
    std::array<double, kNumCoords> coords{};
    for (std::size_t i = 0; i < kNumCoords; ++i) coords[i] = centers[k][i] + noise(rng);
    return LabeledFrame{LandmarkFrame::from_values(coords, centers[k][kNumCoords]), Label(k)};
  };
  ClusterData data;
  data.min_center_distance = closest;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    for (std::size_t i = 0; i < train_per_class; ++i) data.train.push_back(sample(k));
    for (std::size_t i = 0; i < val_per_class; ++i) data.validation.push_back(sample(k));
    for (std::size_t i = 0; i < test_per_class; ++i) data.test.push_back(sample(k));
  }
  return data;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("signspell-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace signspell::testing
