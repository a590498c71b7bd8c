#include "essl/image.hpp"

#include <algorithm>
#include <cmath>

namespace essl {

Image rot90_ccw(const Image& x, int quarter_turns) {
  int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return x;
  if (x.h != x.w)
    throw std::invalid_argument("rot90_ccw: quarter turns need a square image");
  const int n = x.h;
  Image y(x.c, n, n);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        // One CCW quarter turn: out(i,j) = in(j, n-1-i).
        int si = i, sj = j;
        for (int t = 0; t < k; ++t) {
          int ni = sj, nj = n - 1 - si;
          si = ni;
          sj = nj;
        }
        y.at(c, i, j) = x.at(c, si, sj);
      }
  return y;
}

Image flip_horizontal(const Image& x) {
  Image y(x.c, x.h, x.w);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j) y.at(c, i, j) = x.at(c, i, x.w - 1 - j);
  return y;
}

Image flip_vertical(const Image& x) {
  Image y(x.c, x.h, x.w);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j) y.at(c, i, j) = x.at(c, x.h - 1 - i, j);
  return y;
}

Image roll(const Image& x, int dy, int dx) {
  Image y(x.c, x.h, x.w);
  int sy = ((dy % x.h) + x.h) % x.h;
  int sx = ((dx % x.w) + x.w) % x.w;
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j)
        y.at(c, (i + sy) % x.h, (j + sx) % x.w) = x.at(c, i, j);
  return y;
}

Image permute_tiles_2x2(const Image& x, const int src_of_dst[4]) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw std::invalid_argument("permute_tiles_2x2: image dimensions must be even");
  const int th = x.h / 2, tw = x.w / 2;
  Image y(x.c, x.h, x.w);
  for (int d = 0; d < 4; ++d) {
    int s = src_of_dst[d];
    int dy0 = (d / 2) * th, dx0 = (d % 2) * tw;
    int sy0 = (s / 2) * th, sx0 = (s % 2) * tw;
    for (int c = 0; c < x.c; ++c)
      for (int i = 0; i < th; ++i)
        for (int j = 0; j < tw; ++j)
          y.at(c, dy0 + i, dx0 + j) = x.at(c, sy0 + i, sx0 + j);
  }
  return y;
}

Image invert_colors(const Image& x, float max_value) {
  Image y(x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.data[i] = max_value - x.data[i];
  return y;
}

Image scale_pixels(const Image& x, float factor) {
  Image y(x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.data[i] = factor * x.data[i];
  return y;
}

namespace {

std::vector<float> gaussian_kernel_1d(int k, float sigma) {
  std::vector<float> ker(k);
  int half = k / 2;
  float sum = 0.f;
  for (int i = 0; i < k; ++i) {
    float d = static_cast<float>(i - half);
    ker[i] = std::exp(-0.5f * d * d / (sigma * sigma));
    sum += ker[i];
  }
  for (auto& v : ker) v /= sum;
  return ker;
}

inline int reflect_index(int i, int n) {
  // Reflect without repeating the border pixel (..., 2, 1, 0, 1, 2, ...).
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

Image gaussian_blur(const Image& x, int kernel_size, float sigma) {
  if (kernel_size <= 1) return x;
  if (kernel_size % 2 == 0)
    throw std::invalid_argument("gaussian_blur: kernel size must be odd");
  auto ker = gaussian_kernel_1d(kernel_size, sigma);
  int half = kernel_size / 2;
  Image tmp(x.c, x.h, x.w), y(x.c, x.h, x.w);
  for (int c = 0; c < x.c; ++c) {
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j) {
        float acc = 0.f;
        for (int t = -half; t <= half; ++t)
          acc += ker[t + half] * x.at(c, i, reflect_index(j + t, x.w));
        tmp.at(c, i, j) = acc;
      }
    for (int i = 0; i < x.h; ++i)
      for (int j = 0; j < x.w; ++j) {
        float acc = 0.f;
        for (int t = -half; t <= half; ++t)
          acc += ker[t + half] * tmp.at(c, reflect_index(i + t, x.h), j);
        y.at(c, i, j) = acc;
      }
  }
  return y;
}

Image resize_bilinear(const Image& x, int out_h, int out_w) {
  if (out_h == x.h && out_w == x.w) return x;
  Image y(x.c, out_h, out_w);
  float scale_y = static_cast<float>(x.h) / out_h;
  float scale_x = static_cast<float>(x.w) / out_w;
  for (int i = 0; i < out_h; ++i) {
    float sy = (i + 0.5f) * scale_y - 0.5f;
    int y0 = static_cast<int>(std::floor(sy));
    float fy = sy - y0;
    int y0c = std::clamp(y0, 0, x.h - 1), y1c = std::clamp(y0 + 1, 0, x.h - 1);
    for (int j = 0; j < out_w; ++j) {
      float sx = (j + 0.5f) * scale_x - 0.5f;
      int x0 = static_cast<int>(std::floor(sx));
      float fx = sx - x0;
      int x0c = std::clamp(x0, 0, x.w - 1), x1c = std::clamp(x0 + 1, 0, x.w - 1);
      for (int c = 0; c < x.c; ++c) {
        float top = x.at(c, y0c, x0c) * (1 - fx) + x.at(c, y0c, x1c) * fx;
        float bot = x.at(c, y1c, x0c) * (1 - fx) + x.at(c, y1c, x1c) * fx;
        y.at(c, i, j) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return y;
}

Image crop_resize(const Image& x, int top, int left, int ch, int cw,
                  int out_h, int out_w) {
  if (top < 0 || left < 0 || top + ch > x.h || left + cw > x.w || ch <= 0 || cw <= 0)
    throw std::invalid_argument("crop_resize: crop window out of bounds");
  Image crop(x.c, ch, cw);
  for (int c = 0; c < x.c; ++c)
    for (int i = 0; i < ch; ++i)
      for (int j = 0; j < cw; ++j) crop.at(c, i, j) = x.at(c, top + i, left + j);
  return resize_bilinear(crop, out_h, out_w);
}

Image rotate_arbitrary(const Image& x, float radians) {
  Image y(x.c, x.h, x.w);
  float cy = (x.h - 1) * 0.5f, cx = (x.w - 1) * 0.5f;
  float ca = std::cos(radians), sa = std::sin(radians);
  for (int i = 0; i < x.h; ++i)
    for (int j = 0; j < x.w; ++j) {
      // Inverse map: rotate destination coords by -angle.
      float dy = i - cy, dx = j - cx;
      float sy = ca * dy + sa * dx + cy;
      float sx = -sa * dy + ca * dx + cx;
      int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      float fy = sy - y0, fx = sx - x0;
      for (int c = 0; c < x.c; ++c) {
        auto sample = [&](int yy, int xx) -> float {
          if (yy < 0 || yy >= x.h || xx < 0 || xx >= x.w) return 0.f;
          return x.at(c, yy, xx);
        };
        float top = sample(y0, x0) * (1 - fx) + sample(y0, x0 + 1) * fx;
        float bot = sample(y0 + 1, x0) * (1 - fx) + sample(y0 + 1, x0 + 1) * fx;
        y.at(c, i, j) = top * (1 - fy) + bot * fy;
      }
    }
  return y;
}

Image rgb_to_grayscale3(const Image& x) {
  if (x.c != 3) throw std::invalid_argument("rgb_to_grayscale3: need 3 channels");
  Image y(3, x.h, x.w);
  for (int i = 0; i < x.h; ++i)
    for (int j = 0; j < x.w; ++j) {
      float g = 0.299f * x.at(0, i, j) + 0.587f * x.at(1, i, j) +
                0.114f * x.at(2, i, j);
      y.at(0, i, j) = y.at(1, i, j) = y.at(2, i, j) = g;
    }
  return y;
}

void rgb_to_hsv_pixel(float r, float g, float b, float& hh, float& s, float& v) {
  float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  float d = mx - mn;
  s = mx > 0.f ? d / mx : 0.f;
  if (d <= 0.f) {
    hh = 0.f;
    return;
  }
  if (mx == r)
    hh = (g - b) / d;
  else if (mx == g)
    hh = 2.f + (b - r) / d;
  else
    hh = 4.f + (r - g) / d;
  hh /= 6.f;
  if (hh < 0.f) hh += 1.f;
}

void hsv_to_rgb_pixel(float hh, float s, float v, float& r, float& g, float& b) {
  hh = hh - std::floor(hh);
  float h6 = hh * 6.f;
  int i = static_cast<int>(h6) % 6;
  float f = h6 - std::floor(h6);
  float p = v * (1.f - s);
  float q = v * (1.f - s * f);
  float t = v * (1.f - s * (1.f - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace essl
