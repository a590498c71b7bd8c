#pragma once

#include <filesystem>
#include <vector>

#include "essl/core.hpp"
#include "essl/groups.hpp"
#include "essl/image.hpp"

namespace essl::data {

constexpr int kLabelAbsent = -1;

struct ImageRecord {
  Image pixels;  // (channels, H, W) in [0, 1]
  int label = kLabelAbsent;
};

enum class Split { kTrain, kTest };
inline const char* split_dir(Split s) { return s == Split::kTrain ? "train" : "test"; }

// ---------------------------------------------------------------------------
// On-disk layout: each split directory holds one binary index file,
// little-endian u32 record count, then per record a u32 label followed by
// raw u8 CHW pixels. Pixel geometry comes from the dataset preset.
// ---------------------------------------------------------------------------

void save_index_file(const std::filesystem::path& path,
                     const std::vector<ImageRecord>& records);
std::vector<ImageRecord> load_index_file(const std::filesystem::path& path,
                                         int channels, int height, int width);

/// Loads a split and takes a seed-deterministic stratified subsample
/// (per-class counts differ by at most one record).
std::vector<ImageRecord> load_image_dataset(const std::filesystem::path& root,
                                            Split split, double subsample_fraction,
                                            RngStream& rng, int channels = 3,
                                            int height = 32, int width = 32);

/// Stratified subsample of already-loaded records.
std::vector<ImageRecord> stratified_subsample(const std::vector<ImageRecord>& records,
                                              double fraction, RngStream& rng);

/// Ingests the standard public CIFAR-10 binary archive directory
/// (data_batch_1.bin .. data_batch_5.bin, test_batch.bin) into the index
/// layout above.
void convert_cifar_binary(const std::filesystem::path& src_dir,
                          const std::filesystem::path& dst_dir);

// ---------------------------------------------------------------------------
// Synthetic periodic unit cells.
// ---------------------------------------------------------------------------

enum class CellFamily { kBlob, kGpm };
inline const char* to_string(CellFamily f) { return f == CellFamily::kBlob ? "blob" : "gpm"; }

constexpr int kCellSize = 32;
constexpr int kDosBins = 400;

/// Two-tone 32x32 permittivity map with values in [1, 20].
struct SyntheticUnitCell {
  Image cell;  // (1, 32, 32)
  CellFamily family = CellFamily::kBlob;
};

struct RegressionRecord {
  SyntheticUnitCell cell;
  std::vector<double> dos_surrogate;  // length 400, elementwise >= 0
};

/// Centered two-tone level-set blobs; the blob centroid stays within one
/// pixel of the cell center.
std::vector<SyntheticUnitCell> generate_blob_cells(int n, RngStream& rng);

/// Two-tone Fourier level-set cells with exact row-mirror symmetry
/// (cell == vertical mirror of cell, bitwise).
std::vector<SyntheticUnitCell> generate_gpm_cells(int n, RngStream& rng);

/// Deterministic label standing in for a physics solver:
///   1. normalize the permittivity by its mean      (kills scaling)
///   2. take the 2-D DFT magnitude                  (kills rolling shifts)
///   3. average over the 8 square-symmetry ops      (kills rotations/mirrors)
///   4. bin radially into 400 nonnegative values.
/// All arithmetic is double precision; `prescale` multiplies the cell before
/// anything else so scale invariance can be exercised without float32
/// quantization.
std::vector<double> compute_surrogate_dos(const SyntheticUnitCell& cell,
                                          double prescale = 1.0);

std::vector<RegressionRecord> make_regression_dataset(CellFamily family, int n,
                                                      RngStream& rng);

// Flat binary serialization: f32 cells then f32 labels, plus a text manifest.
void save_regression_dataset(const std::filesystem::path& dir,
                             const std::vector<RegressionRecord>& records,
                             uint64_t seed);
std::vector<RegressionRecord> load_regression_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Orientation bias control.
// ---------------------------------------------------------------------------

enum class OrientationMode { kCanonicalOnly, kAllOrientations };

struct OrientationBiasConfig {
  OrientationMode mode = OrientationMode::kCanonicalOnly;
  GroupName group = GroupName::kFourFoldRotations;
};

/// kCanonicalOnly returns the input unchanged (natural data is assumed
/// canonical); kAllOrientations replaces every record by a uniformly
/// transformed copy so each orbit appears in all orientations.
std::vector<ImageRecord> apply_orientation_bias(const std::vector<ImageRecord>& data,
                                                const OrientationBiasConfig& cfg,
                                                RngStream& rng);

// ---------------------------------------------------------------------------
// Procedural classification corpus: 10 texture/shape classes on 3x32x32
// canvases with a shared upright background bias, used as a stand-in when
// no real image corpus is installed.
// ---------------------------------------------------------------------------

std::vector<ImageRecord> generate_synthetic10(int n, RngStream& rng);

/// Writes train/test splits of the procedural corpus in the index layout.
void materialize_synthetic10(const std::filesystem::path& root, int train_n, int test_n,
                             uint64_t seed);

}  // namespace essl::data
