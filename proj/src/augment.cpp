#include "essl/augment.hpp"

#include <algorithm>
#include <cmath>

namespace essl {

AugmentationPolicy AugmentationPolicy::cifar(int level, int crop_size) {
  AugmentationPolicy p;
  p.level = level;
  p.crop_size = crop_size;
  p.validate();
  return p;
}

void AugmentationPolicy::validate() const {
  if (level < 0 || level > 7)
    throw std::invalid_argument("AugmentationPolicy: level must be in [0, 7]");
  if (!(crop_scale.first > 0.0) || crop_scale.first > crop_scale.second ||
      crop_scale.second > 1.0)
    throw std::invalid_argument("AugmentationPolicy: bad crop scale range");
  if (crop_size <= 0)
    throw std::invalid_argument("AugmentationPolicy: bad crop size");
}

namespace {

Image random_resized_crop(const Image& x, const AugmentationPolicy& p,
                          RngStream& rng) {
  const double area = static_cast<double>(x.h) * x.w;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double target = area * rng.uniform(p.crop_scale.first, p.crop_scale.second);
    double log_ratio =
        rng.uniform(std::log(p.crop_ratio.first), std::log(p.crop_ratio.second));
    double ratio = std::exp(log_ratio);
    int cw = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    int ch = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (cw > 0 && ch > 0 && cw <= x.w && ch <= x.h) {
      int top = rng.uniform_int(x.h - ch + 1);
      int left = rng.uniform_int(x.w - cw + 1);
      return crop_resize(x, top, left, ch, cw, p.crop_size, p.crop_size);
    }
  }
  // Fallback: whole-image crop clipped to the ratio range.
  int ch = x.h, cw = x.w;
  return crop_resize(x, (x.h - ch) / 2, (x.w - cw) / 2, ch, cw, p.crop_size,
                     p.crop_size);
}

void clamp01(Image& x) {
  for (auto& v : x.data) v = std::clamp(v, 0.f, 1.f);
}

void adjust_brightness(Image& x, float f) {
  for (auto& v : x.data) v *= f;
  clamp01(x);
}

void adjust_contrast(Image& x, float f) {
  Image g = rgb_to_grayscale3(x);
  double mean = 0.0;
  for (int i = 0; i < x.h; ++i)
    for (int j = 0; j < x.w; ++j) mean += g.at(0, i, j);
  mean /= static_cast<double>(x.h) * x.w;
  float m = static_cast<float>(mean);
  for (auto& v : x.data) v = f * v + (1.f - f) * m;
  clamp01(x);
}

void adjust_saturation(Image& x, float f) {
  Image g = rgb_to_grayscale3(x);
  for (size_t i = 0; i < x.size(); ++i)
    x.data[i] = f * x.data[i] + (1.f - f) * g.data[i];
  clamp01(x);
}

void adjust_hue(Image& x, float shift) {
  for (int i = 0; i < x.h; ++i)
    for (int j = 0; j < x.w; ++j) {
      float h, s, v;
      rgb_to_hsv_pixel(x.at(0, i, j), x.at(1, i, j), x.at(2, i, j), h, s, v);
      h += shift;
      hsv_to_rgb_pixel(h, s, v, x.at(0, i, j), x.at(1, i, j), x.at(2, i, j));
    }
}

void color_jitter(Image& x, const std::array<double, 4>& strength, RngStream& rng) {
  // Factors first, then a random op order, matching the usual recipe.
  auto span = [&](double s) {
    return static_cast<float>(rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s));
  };
  float fb = span(strength[0]);
  float fc = span(strength[1]);
  float fs = span(strength[2]);
  float fh = static_cast<float>(rng.uniform(-strength[3], strength[3]));
  std::array<int, 4> order = {0, 1, 2, 3};
  rng.shuffle(order.begin(), order.end());
  for (int op : order) {
    switch (op) {
      case 0: adjust_brightness(x, fb); break;
      case 1: adjust_contrast(x, fc); break;
      case 2: adjust_saturation(x, fs); break;
      case 3: adjust_hue(x, fh); break;
    }
  }
}

void solarize_op(Image& x, float threshold) {
  for (auto& v : x.data)
    if (v >= threshold) v = 1.f - v;
}

}  // namespace

Image augment(const Image& x, const AugmentationPolicy& policy, RngStream& rng) {
  policy.validate();
  x.require_shape("augment");
  Image out = x;
  if (policy.prepend_group) {
    auto grp = group(*policy.prepend_group);
    out = apply(sample(grp, rng, policy.prepend_s_max), out);
  }
  if (policy.level >= 1) out = random_resized_crop(out, policy, rng);
  if (policy.level >= 2 && rng.bernoulli(policy.p_hflip)) out = flip_horizontal(out);
  if (policy.level >= 3 && rng.bernoulli(policy.p_jitter))
    color_jitter(out, policy.jitter_strength, rng);
  if (policy.level >= 4 && rng.bernoulli(policy.p_grayscale))
    out = rgb_to_grayscale3(out);
  if (policy.level >= 5 && rng.bernoulli(policy.p_blur)) {
    float sigma =
        static_cast<float>(rng.uniform(policy.blur_sigma.first, policy.blur_sigma.second));
    out = gaussian_blur(out, policy.blur_kernel, sigma);
  }
  if (policy.level >= 6) {
    float angle = static_cast<float>(
        rng.uniform(-policy.rotation_max_radians, policy.rotation_max_radians));
    out = rotate_arbitrary(out, angle);
  }
  if (policy.level >= 7 && rng.bernoulli(policy.p_vflip)) out = flip_vertical(out);
  if (policy.solarize && rng.bernoulli(policy.p_solarize))
    solarize_op(out, static_cast<float>(policy.solarize_threshold));
  return out;
}

Image augment_cell(const Image& x, const CellAugmentOptions& opts, RngStream& rng) {
  Image out = x;
  if (opts.rolls) {
    int dy = rng.uniform_int(out.h);
    int dx = rng.uniform_int(out.w);
    out = roll(out, dy, dx);
  }
  if (opts.c4v) {
    int k = rng.uniform_int(4);
    if (k) out = rot90_ccw(out, k);
    if (rng.bernoulli(0.5)) out = flip_horizontal(out);
  }
  if (opts.mirrors) {
    if (rng.bernoulli(0.5)) out = flip_horizontal(out);
    if (rng.bernoulli(0.5)) out = flip_vertical(out);
  }
  if (opts.scaling) {
    auto g = sample(group(GroupName::kScaling), rng, opts.s_max);
    out = apply(g, out);
  }
  return out;
}

}  // namespace essl
