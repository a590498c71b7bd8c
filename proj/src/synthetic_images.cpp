#include <cmath>

#include "essl/datasets.hpp"

namespace essl::data {

namespace {

struct Rgb {
  float r, g, b;
};

Rgb random_saturated(RngStream& rng) {
  float r, g, b;
  hsv_to_rgb_pixel(static_cast<float>(rng.uniform()),
                   static_cast<float>(rng.uniform(0.55, 1.0)),
                   static_cast<float>(rng.uniform(0.6, 1.0)), r, g, b);
  return {r, g, b};
}

Rgb random_muted(RngStream& rng, double v_lo, double v_hi) {
  float r, g, b;
  hsv_to_rgb_pixel(static_cast<float>(rng.uniform()),
                   static_cast<float>(rng.uniform(0.1, 0.45)),
                   static_cast<float>(rng.uniform(v_lo, v_hi)), r, g, b);
  return {r, g, b};
}

/// Object membership and two-tone texture id for each class family.
/// Returns -1 outside the object, else 0/1 selecting the object color.
int object_texel(int cls, float dy, float dx, float radius, float stripe) {
  float d = std::hypot(dy, dx);
  auto stripes = [&](float coord) {
    return static_cast<int>(std::floor(coord / stripe)) & 1;
  };
  switch (cls) {
    case 0:  // horizontally striped disk
      return d <= radius ? stripes(dy) : -1;
    case 1:  // vertically striped disk
      return d <= radius ? stripes(dx) : -1;
    case 2:  // checkerboard square
      if (std::abs(dy) > radius || std::abs(dx) > radius) return -1;
      return (static_cast<int>(std::floor(dy / stripe)) +
              static_cast<int>(std::floor(dx / stripe))) & 1;
    case 3:  // concentric rings
      return d <= radius ? stripes(d) : -1;
    case 4: {  // triangle pointing up
      if (dy < -radius || dy > 0.8f * radius) return -1;
      return std::abs(dx) <= 0.577f * (dy + radius) ? 0 : -1;
    }
    case 5: {  // plus sign
      float w = 0.35f * radius;
      bool in = (std::abs(dx) <= w && std::abs(dy) <= radius) ||
                (std::abs(dy) <= w && std::abs(dx) <= radius);
      return in ? 0 : -1;
    }
    case 6:  // diagonally striped disk
      return d <= radius ? stripes(dx + dy) : -1;
    case 7: {  // wide solid ellipse
      float a = 1.3f * radius, b = 0.6f * radius;
      return (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.f ? 0 : -1;
    }
    case 8: {  // four radial spokes
      if (d > radius || d < 0.15f * radius) return -1;
      float theta = std::atan2(dy, dx) + static_cast<float>(M_PI);
      int sector = static_cast<int>(theta / (M_PI / 4.0));
      return (sector & 1) ? -1 : 0;
    }
    case 9: {  // small block stacked on a large block
      if (std::abs(dx) <= 0.85f * radius && dy >= 0.f && dy <= radius) return 0;
      if (std::abs(dx) <= 0.4f * radius && dy >= -radius && dy <= -0.25f * radius)
        return 1;
      return -1;
    }
  }
  return -1;
}

}  // namespace

std::vector<ImageRecord> generate_synthetic10(int n, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("generate_synthetic10: n must be positive");
  const int N = 32;
  std::vector<ImageRecord> out;
  out.reserve(n);
  for (int idx = 0; idx < n; ++idx) {
    int cls = idx % 10;
    // Upright scene: light top fading into a darker ground band.
    Rgb sky = random_muted(rng, 0.55, 0.9);
    Rgb ground = random_muted(rng, 0.15, 0.4);
    float horizon = static_cast<float>(rng.uniform(0.62, 0.8));
    Rgb ca = random_saturated(rng);
    Rgb cb = random_saturated(rng);
    float radius = static_cast<float>(rng.uniform(7.0, 11.0));
    float stripe = static_cast<float>(rng.uniform(2.0, 3.5));
    float cy = 15.5f + static_cast<float>(rng.uniform(-4.0, 4.0));
    float cx = 15.5f + static_cast<float>(rng.uniform(-4.0, 4.0));

    ImageRecord rec;
    rec.label = cls;
    rec.pixels = Image(3, N, N);
    for (int i = 0; i < N; ++i) {
      float t = static_cast<float>(i) / (N - 1);
      float gmix = t < horizon ? 0.35f * t / horizon : 1.f;
      Rgb bg{sky.r + (ground.r - sky.r) * gmix, sky.g + (ground.g - sky.g) * gmix,
             sky.b + (ground.b - sky.b) * gmix};
      for (int j = 0; j < N; ++j) {
        int texel = object_texel(cls, i - cy, j - cx, radius, stripe);
        Rgb px = texel < 0 ? bg : (texel == 0 ? ca : cb);
        float noise = static_cast<float>(rng.normal(0.0, 0.02));
        rec.pixels.at(0, i, j) = std::clamp(px.r + noise, 0.f, 1.f);
        rec.pixels.at(1, i, j) = std::clamp(px.g + noise, 0.f, 1.f);
        rec.pixels.at(2, i, j) = std::clamp(px.b + noise, 0.f, 1.f);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void materialize_synthetic10(const std::filesystem::path& root, int train_n, int test_n,
                             uint64_t seed) {
  auto base = make_root_stream(seed);
  auto train_rng = base.derive("synthetic10.train");
  auto test_rng = base.derive("synthetic10.test");
  save_index_file(root / "train" / "index.bin", generate_synthetic10(train_n, train_rng));
  save_index_file(root / "test" / "index.bin", generate_synthetic10(test_n, test_rng));
}

}  // namespace essl::data
