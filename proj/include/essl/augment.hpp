#pragma once

#include <optional>

#include "essl/core.hpp"
#include "essl/groups.hpp"
#include "essl/image.hpp"

namespace essl {

/// Stochastic view policy built as an incremental ladder: level k applies
/// exactly the ops of level k-1 plus one new op, in this order:
///   0 none, 1 random resized crop, 2 horizontal flip 0.5, 3 color jitter 0.8,
///   4 grayscale 0.2, 5 Gaussian blur 0.2, 6 rotation within +-pi/6,
///   7 vertical flip 0.5.
/// Solarization sits above the ladder as an opt-in extra, off by default.
struct AugmentationPolicy {
  int level = 4;
  std::pair<double, double> crop_scale = {0.2, 1.0};
  std::pair<double, double> crop_ratio = {3.0 / 4.0, 4.0 / 3.0};
  int crop_size = 32;
  std::array<double, 4> jitter_strength = {0.4, 0.4, 0.4, 0.1};

  double p_hflip = 0.5;
  double p_jitter = 0.8;
  double p_grayscale = 0.2;
  double p_blur = 0.2;
  double p_vflip = 0.5;

  int blur_kernel = 3;
  std::pair<double, double> blur_sigma = {0.1, 2.0};
  double rotation_max_radians = 3.14159265358979323846 / 6.0;

  bool solarize = false;
  double p_solarize = 0.2;
  double solarize_threshold = 0.5;

  /// When set, a uniformly sampled element of this set is applied before
  /// everything else with probability 1 (the "insensitive" treatment of a
  /// transformation: it becomes part of the invariance policy).
  std::optional<GroupName> prepend_group;
  double prepend_s_max = 10.0;  // scaling only

  static AugmentationPolicy cifar(int level, int crop_size = 32);
  static AugmentationPolicy none() { return cifar(0); }

  void validate() const;
};

/// Draws one stochastic view. Level 0 with no prepended transform returns
/// the input unchanged.
Image augment(const Image& x, const AugmentationPolicy& policy, RngStream& rng);

/// Invariance-view policy for periodic permittivity cells: compositions of
/// label-preserving physical transformations rather than photmetric ops.
struct CellAugmentOptions {
  bool c4v = false;          // uniform over the 8 square-symmetry ops
  bool rolls = false;        // uniform rolling translation on both axes
  bool mirrors = false;      // independent coin per mirror axis
  bool scaling = false;      // multiplicative pixel scaling
  double s_max = 10.0;
};

Image augment_cell(const Image& x, const CellAugmentOptions& opts, RngStream& rng);

}  // namespace essl
