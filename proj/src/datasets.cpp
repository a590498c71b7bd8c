#include "essl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace essl::data {

namespace fs = std::filesystem;

namespace {

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("dataset file truncated");
  return v;
}

}  // namespace

void save_index_file(const fs::path& path, const std::vector<ImageRecord>& records) {
  if (records.empty()) throw std::invalid_argument("save_index_file: no records");
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_index_file: cannot open " + path.string());
  write_pod<uint32_t>(os, static_cast<uint32_t>(records.size()));
  std::vector<uint8_t> buf;
  for (const auto& r : records) {
    r.pixels.require_shape("save_index_file");
    write_pod<uint32_t>(os, static_cast<uint32_t>(r.label));
    buf.resize(r.pixels.size());
    for (size_t i = 0; i < buf.size(); ++i) {
      float v = std::clamp(r.pixels.data[i], 0.f, 1.f);
      buf[i] = static_cast<uint8_t>(std::lround(v * 255.f));
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
  }
  if (!os) throw std::runtime_error("save_index_file: write failed");
}

std::vector<ImageRecord> load_index_file(const fs::path& path, int channels, int height,
                                         int width) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_index_file: missing file " + path.string());
  auto count = read_pod<uint32_t>(is);
  const size_t pix = static_cast<size_t>(channels) * height * width;
  std::vector<ImageRecord> out;
  out.reserve(count);
  std::vector<uint8_t> buf(pix);
  for (uint32_t i = 0; i < count; ++i) {
    ImageRecord r;
    r.label = static_cast<int>(read_pod<uint32_t>(is));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pix));
    if (!is)
      throw std::runtime_error("load_index_file: corrupt record " + std::to_string(i) +
                               " in " + path.string());
    r.pixels = Image(channels, height, width);
    for (size_t k = 0; k < pix; ++k) r.pixels.data[k] = buf[k] / 255.f;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ImageRecord> stratified_subsample(const std::vector<ImageRecord>& records,
                                              double fraction, RngStream& rng) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample fraction must be in (0, 1]");
  if (fraction == 1.0) return records;
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < records.size(); ++i) by_class[records[i].label].push_back(i);

  long target = std::lround(fraction * static_cast<double>(records.size()));
  target = std::max<long>(1, target);
  // Largest-remainder allocation keeps class counts within one of each other
  // for balanced inputs.
  std::vector<std::pair<int, double>> remainders;
  std::map<int, long> quota;
  long assigned = 0;
  for (auto& [cls, idx] : by_class) {
    double exact = fraction * static_cast<double>(idx.size());
    quota[cls] = static_cast<long>(std::floor(exact));
    assigned += quota[cls];
    remainders.emplace_back(cls, exact - std::floor(exact));
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned)
    quota[remainders[i].first] += 1;

  std::vector<ImageRecord> out;
  out.reserve(target);
  for (auto& [cls, idx] : by_class) {
    auto sub = rng.derive("subsample.class", static_cast<uint64_t>(cls + 1000000));
    std::vector<size_t> shuffled = idx;
    sub.shuffle(shuffled.begin(), shuffled.end());
    long q = std::min<long>(quota[cls], static_cast<long>(shuffled.size()));
    for (long i = 0; i < q; ++i) out.push_back(records[shuffled[i]]);
  }
  return out;
}

std::vector<ImageRecord> load_image_dataset(const fs::path& root, Split split,
                                            double subsample_fraction, RngStream& rng,
                                            int channels, int height, int width) {
  auto path = root / split_dir(split) / "index.bin";
  auto records = load_index_file(path, channels, height, width);
  return stratified_subsample(records, subsample_fraction, rng);
}

void convert_cifar_binary(const fs::path& src_dir, const fs::path& dst_dir) {
  auto read_batch = [](const fs::path& p, std::vector<ImageRecord>& out) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("convert: missing batch file " + p.string());
    constexpr size_t kRecord = 1 + 3072;
    std::vector<uint8_t> buf(kRecord);
    while (is.read(reinterpret_cast<char*>(buf.data()), kRecord)) {
      ImageRecord r;
      r.label = buf[0];
      r.pixels = Image(3, 32, 32);
      for (size_t k = 0; k < 3072; ++k) r.pixels.data[k] = buf[1 + k] / 255.f;
      out.push_back(std::move(r));
    }
  };
  std::vector<ImageRecord> train;
  for (int b = 1; b <= 5; ++b)
    read_batch(src_dir / ("data_batch_" + std::to_string(b) + ".bin"), train);
  std::vector<ImageRecord> test;
  read_batch(src_dir / "test_batch.bin", test);
  if (train.size() != 50000 || test.size() != 10000)
    throw std::runtime_error("convert: unexpected record counts (" +
                             std::to_string(train.size()) + "/" +
                             std::to_string(test.size()) + ")");
  save_index_file(dst_dir / "train" / "index.bin", train);
  save_index_file(dst_dir / "test" / "index.bin", test);
}

// ---------------------------------------------------------------------------
// Synthetic unit cells.
// ---------------------------------------------------------------------------

namespace {

std::pair<float, float> draw_two_tone(RngStream& rng) {
  float a = static_cast<float>(rng.uniform(1.0, 20.0));
  float b = a;
  while (std::abs(b - a) < 1.0f) b = static_cast<float>(rng.uniform(1.0, 20.0));
  return {a, b};
}

std::pair<double, double> mask_centroid(const std::vector<uint8_t>& mask, int n) {
  double cy = 0, cx = 0, m = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (mask[i * n + j]) {
        cy += i;
        cx += j;
        m += 1;
      }
  if (m == 0) return {0.5 * (n - 1), 0.5 * (n - 1)};
  return {cy / m, cx / m};
}

void roll_mask(std::vector<uint8_t>& mask, int n, int dy, int dx) {
  std::vector<uint8_t> out(mask.size());
  int sy = ((dy % n) + n) % n, sx = ((dx % n) + n) % n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out[((i + sy) % n) * n + (j + sx) % n] = mask[i * n + j];
  mask.swap(out);
}

}  // namespace

std::vector<SyntheticUnitCell> generate_blob_cells(int n, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("generate_blob_cells: n must be positive");
  const int N = kCellSize;
  const double cy = 0.5 * (N - 1), cx = 0.5 * (N - 1);
  std::vector<SyntheticUnitCell> out;
  out.reserve(n);
  for (int cell_idx = 0; cell_idx < n; ++cell_idx) {
    double r0 = rng.uniform(5.0, 8.0);
    std::array<double, 3> amp{}, phase{};
    for (int m = 0; m < 3; ++m) {
      amp[m] = rng.uniform(0.0, 0.3 * r0 / (m + 1));
      phase[m] = rng.uniform(0.0, 2.0 * M_PI);
    }
    std::vector<uint8_t> mask(N * N, 0);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        double dy = i - cy, dx = j - cx;
        double d = std::hypot(dy, dx);
        double theta = std::atan2(dy, dx);
        double r = r0;
        for (int m = 0; m < 3; ++m) r += amp[m] * std::cos((m + 1) * theta + phase[m]);
        mask[i * N + j] = d <= r ? 1 : 0;
      }
    // Re-center by integer rolls until the blob centroid sits within a
    // pixel of the cell center.
    for (int iter = 0; iter < 8; ++iter) {
      auto [my, mx] = mask_centroid(mask, N);
      int dy = static_cast<int>(std::lround(cy - my));
      int dx = static_cast<int>(std::lround(cx - mx));
      if (dy == 0 && dx == 0) break;
      roll_mask(mask, N, dy, dx);
    }
    auto [eps_in, eps_out] = draw_two_tone(rng);
    SyntheticUnitCell cell;
    cell.family = CellFamily::kBlob;
    cell.cell = Image(1, N, N);
    for (int i = 0; i < N * N; ++i) cell.cell.data[i] = mask[i] ? eps_in : eps_out;
    out.push_back(std::move(cell));
  }
  return out;
}

std::vector<SyntheticUnitCell> generate_gpm_cells(int n, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("generate_gpm_cells: n must be positive");
  const int N = kCellSize;
  const int K = 3;  // Fourier order of the level-set field
  std::vector<SyntheticUnitCell> out;
  out.reserve(n);
  std::vector<double> field(N * N);
  for (int cell_idx = 0; cell_idx < n; ++cell_idx) {
    std::fill(field.begin(), field.end(), 0.0);
    for (int kx = -K; kx <= K; ++kx)
      for (int ky = -K; ky <= K; ++ky) {
        if (kx == 0 && ky == 0) continue;
        double a = rng.normal() / (1.0 + std::abs(kx) + std::abs(ky));
        double ph = rng.uniform(0.0, 2.0 * M_PI);
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j)
            field[i * N + j] +=
                a * std::cos(2.0 * M_PI * (kx * i + ky * j) / N + ph);
      }
    // Row-mirror symmetrization; (a+b)/2 commutes bitwise, so the
    // constraint is exact.
    for (int i = 0; i < N / 2; ++i)
      for (int j = 0; j < N; ++j) {
        double v = 0.5 * (field[i * N + j] + field[(N - 1 - i) * N + j]);
        field[i * N + j] = v;
        field[(N - 1 - i) * N + j] = v;
      }
    std::vector<double> sorted = field;
    std::sort(sorted.begin(), sorted.end());
    double q = rng.uniform(0.35, 0.65);
    double threshold = sorted[static_cast<size_t>(q * (sorted.size() - 1))];
    auto [eps_in, eps_out] = draw_two_tone(rng);
    SyntheticUnitCell cell;
    cell.family = CellFamily::kGpm;
    cell.cell = Image(1, N, N);
    for (int i = 0; i < N * N; ++i)
      cell.cell.data[i] = field[i] > threshold ? eps_in : eps_out;
    out.push_back(std::move(cell));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Surrogate label.
// ---------------------------------------------------------------------------

namespace {

using Cd = std::complex<double>;
using MatC = Eigen::Matrix<Cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const MatC& dft_matrix() {
  static const MatC w = [] {
    const int N = kCellSize;
    MatC m(N, N);
    for (int u = 0; u < N; ++u)
      for (int x = 0; x < N; ++x)
        m(u, x) = std::polar(1.0, -2.0 * M_PI * u * x / N);
    return m;
  }();
  return w;
}

MatD dft_magnitude(const MatD& x) {
  const auto& w = dft_matrix();
  MatC f = w * x.cast<Cd>() * w.transpose();
  return f.cwiseAbs() / static_cast<double>(kCellSize * kCellSize);
}

MatD rot90d(const MatD& x) {
  const long n = x.rows();
  MatD y(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) y(i, j) = x(j, n - 1 - i);
  return y;
}

MatD fliph(const MatD& x) {
  return x.rowwise().reverse();
}

}  // namespace

std::vector<double> compute_surrogate_dos(const SyntheticUnitCell& cell, double prescale) {
  cell.cell.require_shape("compute_surrogate_dos");
  if (cell.cell.c != 1 || cell.cell.h != kCellSize || cell.cell.w != kCellSize)
    throw std::invalid_argument("compute_surrogate_dos: expected a (1,32,32) cell");
  if (!(prescale > 0.0))
    throw std::invalid_argument("compute_surrogate_dos: prescale must be positive");
  const int N = kCellSize;
  MatD p(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      double v = prescale * static_cast<double>(cell.cell.at(0, i, j));
      if (!(v > 0.0))
        throw std::invalid_argument("compute_surrogate_dos: non-positive permittivity");
      p(i, j) = v;
    }
  p /= p.mean();

  // Average the spectrum over the 8 square-symmetry operations of the cell.
  MatD spectrum = MatD::Zero(N, N);
  MatD r = p;
  for (int k = 0; k < 4; ++k) {
    spectrum += dft_magnitude(r);
    spectrum += dft_magnitude(fliph(r));
    r = rot90d(r);
  }
  spectrum /= 8.0;

  // Radial bins over wrap-around frequency distance.
  std::vector<double> dos(kDosBins, 0.0);
  const double rmax = std::sqrt(2.0) * (N / 2) + 1e-9;
  for (int u = 0; u < N; ++u)
    for (int v = 0; v < N; ++v) {
      int fu = std::min(u, N - u), fv = std::min(v, N - v);
      double rad = std::hypot(static_cast<double>(fu), static_cast<double>(fv));
      int bin = std::min(kDosBins - 1,
                         static_cast<int>(rad / rmax * kDosBins));
      dos[bin] += spectrum(u, v);
    }
  return dos;
}

std::vector<RegressionRecord> make_regression_dataset(CellFamily family, int n,
                                                      RngStream& rng) {
  auto cells = family == CellFamily::kBlob ? generate_blob_cells(n, rng)
                                           : generate_gpm_cells(n, rng);
  std::vector<RegressionRecord> out;
  out.reserve(cells.size());
  for (auto& c : cells) {
    RegressionRecord r;
    r.dos_surrogate = compute_surrogate_dos(c);
    r.cell = std::move(c);
    out.push_back(std::move(r));
  }
  return out;
}

void save_regression_dataset(const fs::path& dir,
                             const std::vector<RegressionRecord>& records,
                             uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("save_regression_dataset: empty");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "cells.bin", std::ios::binary);
    for (const auto& r : records)
      os.write(reinterpret_cast<const char*>(r.cell.cell.data.data()),
               static_cast<std::streamsize>(r.cell.cell.size() * sizeof(float)));
    if (!os) throw std::runtime_error("save_regression_dataset: cells write failed");
  }
  {
    std::ofstream os(dir / "labels.bin", std::ios::binary);
    for (const auto& r : records)
      for (double v : r.dos_surrogate) {
        float f = static_cast<float>(v);
        os.write(reinterpret_cast<const char*>(&f), sizeof(float));
      }
    if (!os) throw std::runtime_error("save_regression_dataset: labels write failed");
  }
  std::ofstream os(dir / "manifest.txt");
  os << "count=" << records.size() << "\nfamily=" << to_string(records[0].cell.family)
     << "\nseed=" << seed << "\n";
}

std::vector<RegressionRecord> load_regression_dataset(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.txt");
  if (!mf) throw std::runtime_error("load_regression_dataset: missing manifest");
  size_t count = 0;
  CellFamily family = CellFamily::kBlob;
  std::string line;
  while (std::getline(mf, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "count") count = std::stoul(val);
    if (key == "family") family = val == "gpm" ? CellFamily::kGpm : CellFamily::kBlob;
  }
  if (count == 0) throw std::runtime_error("load_regression_dataset: bad manifest");
  std::ifstream cs(dir / "cells.bin", std::ios::binary);
  std::ifstream ls(dir / "labels.bin", std::ios::binary);
  if (!cs || !ls) throw std::runtime_error("load_regression_dataset: missing binaries");
  std::vector<RegressionRecord> out(count);
  for (auto& r : out) {
    r.cell.family = family;
    r.cell.cell = Image(1, kCellSize, kCellSize);
    cs.read(reinterpret_cast<char*>(r.cell.cell.data.data()),
            static_cast<std::streamsize>(r.cell.cell.size() * sizeof(float)));
    r.dos_surrogate.resize(kDosBins);
    std::vector<float> buf(kDosBins);
    ls.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(kDosBins * sizeof(float)));
    for (int i = 0; i < kDosBins; ++i) r.dos_surrogate[i] = buf[i];
    if (!cs || !ls) throw std::runtime_error("load_regression_dataset: truncated data");
  }
  return out;
}

std::vector<ImageRecord> apply_orientation_bias(const std::vector<ImageRecord>& data,
                                                const OrientationBiasConfig& cfg,
                                                RngStream& rng) {
  if (cfg.mode == OrientationMode::kCanonicalOnly) return data;
  auto grp = group(cfg.group);
  if (grp.order == kInfiniteOrder)
    throw std::invalid_argument("apply_orientation_bias: group must be finite");
  std::vector<ImageRecord> out;
  out.reserve(data.size());
  for (const auto& r : data) {
    ImageRecord nr;
    nr.label = r.label;
    nr.pixels = apply(sample(grp, rng), r.pixels);
    out.push_back(std::move(nr));
  }
  return out;
}

}  // namespace essl::data
