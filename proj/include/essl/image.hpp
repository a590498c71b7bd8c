#pragma once

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace essl {

/// Dense CHW image with float pixels. Classification corpora keep values in
/// [0, 1]; permittivity cells keep raw physical values.
struct Image {
  int c = 0, h = 0, w = 0;
  std::vector<float> data;  // size c*h*w, row-major per channel

  Image() = default;
  Image(int c_, int h_, int w_, float fill = 0.f)
      : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, fill) {}

  float& at(int ch, int y, int x) {
    return data[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  float at(int ch, int y, int x) const {
    return data[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return c == o.c && h == o.h && w == o.w;
  }

  void require_shape(const std::string& who) const {
    if (c <= 0 || h <= 0 || w <= 0 || data.size() != static_cast<size_t>(c) * h * w)
      throw std::invalid_argument(who + ": malformed image tensor");
  }
};

inline bool bitwise_equal(const Image& a, const Image& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0;
}

// Exact index-permutation ops.
Image rot90_ccw(const Image& x, int quarter_turns);
Image flip_horizontal(const Image& x);  // mirrors columns
Image flip_vertical(const Image& x);    // mirrors rows
Image roll(const Image& x, int dy, int dx);
Image permute_tiles_2x2(const Image& x, const int src_of_dst[4]);

// Value ops.
Image invert_colors(const Image& x, float max_value = 1.0f);
Image scale_pixels(const Image& x, float factor);
Image gaussian_blur(const Image& x, int kernel_size, float sigma);

/// Bilinear resize with half-pixel centers (torch/opencv convention).
Image resize_bilinear(const Image& x, int out_h, int out_w);
/// Crop [top, top+ch) x [left, left+cw), then resize.
Image crop_resize(const Image& x, int top, int left, int ch, int cw,
                  int out_h, int out_w);
/// Rotate by an arbitrary angle (radians, counter-clockwise) about the
/// center, bilinear sampling, zero fill outside.
Image rotate_arbitrary(const Image& x, float radians);

Image rgb_to_grayscale3(const Image& x);
void rgb_to_hsv_pixel(float r, float g, float b, float& hh, float& s, float& v);
void hsv_to_rgb_pixel(float hh, float s, float v, float& r, float& g, float& b);

/// Default sigma for a Gaussian kernel of the given size
/// (0.3*((k-1)*0.5 - 1) + 0.8, the common library convention).
inline float default_blur_sigma(int kernel_size) {
  return 0.3f * ((kernel_size - 1) * 0.5f - 1.0f) + 0.8f;
}

}  // namespace essl
