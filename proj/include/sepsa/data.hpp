#pragma once

// Dataset ingestion (CSV tables, IDX image archives), standardization,
// deterministic splitting, epoch-shuffled batch streams and a synthetic
// separable least-squares generator with a planted model.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sepsa/linalg.hpp"
#include "sepsa/model.hpp"

namespace sepsa::data {

using linalg::Vec;
using model::Sample;

enum class DataErrc {
  Io,
  Malformed,
  MissingColumn,
  BadMagic,
  Truncated,
  CountMismatch,
};

class DataError : public std::runtime_error {
 public:
  DataError(DataErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  DataErrc code() const { return code_; }

 private:
  DataErrc code_;
};

struct Normalization {
  Vec mean;
  Vec stddev;
};

struct Dataset {
  std::string name;
  std::size_t d = 0;
  std::size_t d_o = 0;
  std::vector<Sample> samples;
  std::optional<Normalization> normalization;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// --- CSV -------------------------------------------------------------------

/// Comma-separated with a header row. Columns named in `target_columns`
/// become y (in the given order); all other columns become x in file order.
Dataset load_csv(const std::string& path, std::span<const std::string> target_columns,
                 std::string name = {});
Dataset parse_csv(std::istream& is, std::span<const std::string> target_columns,
                  std::string name = {});

/// Header x0..x{d-1},y0..y{d_o-1}; values printed with 17 significant digits.
void write_csv(std::ostream& os, const Dataset& ds);
void write_csv(const std::string& path, const Dataset& ds);

// --- IDX -------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
};

IdxImages read_idx_images(std::istream& is);
std::vector<std::uint8_t> read_idx_labels(std::istream& is);
void write_idx_images(std::ostream& os, const IdxImages& images);
void write_idx_labels(std::ostream& os, std::span<const std::uint8_t> labels);

/// Pixels scaled by 1/255, labels one-hot over `classes`.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t classes = 10, std::string name = "mnist");

// --- Preprocessing ---------------------------------------------------------

/// Per-feature mean and population standard deviation; constant features get
/// stddev 1 so they map to 0.
Normalization fit_normalization(const Dataset& ds);
Dataset apply_normalization(const Dataset& ds, const Normalization& norm);
/// fit_normalization followed by apply_normalization on the same data.
Dataset standardize(const Dataset& ds);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Seeded permutation; the first ceil(fraction * n) permuted rows form the
/// training part, the rest the test part.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// --- Streaming -------------------------------------------------------------

/// Epoch-wise shuffled index stream. Each epoch visits every index exactly
/// once; the permutation for epoch e is a pure function of (seed, e). The
/// last batch of an epoch may be short.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

  std::vector<std::size_t> next_indices();

  /// 1-based epoch of the most recently returned batch (0 before the first).
  std::size_t epoch() const { return epoch_; }
  /// True when the most recently returned batch closed its epoch.
  bool epoch_finished() const { return started_ && cursor_ == order_.size(); }
  std::size_t batches_per_epoch() const { return (n_ + batch_size_ - 1) / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }

 private:
  void start_epoch();

  std::size_t n_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
  bool started_ = false;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

model::Batch next_batch(BatchStream& stream, const Dataset& ds);

// --- Synthetic -------------------------------------------------------------

struct SynthSpec {
  std::size_t d = 8;
  std::size_t hidden = 16;
  std::size_t d_o = 1;
  std::size_t n_samples = 2000;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

struct Synthetic {
  Dataset data;
  model::SeparableModel planted;
};

/// x ~ N(0, I); y = W* h(x; theta*) + N(0, noise_std^2 I) with the planted
/// (theta*, W*) drawn by Kaiming-uniform initialization.
Synthetic gen_synthetic(const SynthSpec& spec);

}  // namespace sepsa::data
