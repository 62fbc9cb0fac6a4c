#include "sepsa/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sepsa/rng.hpp"

namespace sepsa::data {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::uint32_t read_be32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(DataErrc::Truncated, std::string("IDX: truncated while reading ") + what);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  os.write(b, 4);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(DataErrc::Io, "cannot open " + path);
  return is;
}

}  // namespace

Dataset parse_csv(std::istream& is, std::span<const std::string> target_columns, std::string name) {
  std::string line;
  while (std::getline(is, line) && blank(line)) {
  }
  if (blank(line)) throw DataError(DataErrc::Malformed, "CSV: missing header row");
  const auto header = split_fields(line);

  std::vector<std::size_t> target_idx;
  for (const auto& t : target_columns) {
    const auto it = std::find(header.begin(), header.end(), t);
    if (it == header.end()) throw DataError(DataErrc::MissingColumn, "CSV: missing target column '" + t + "'");
    target_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(target_idx.begin(), target_idx.end(), c) == target_idx.end()) feature_idx.push_back(c);
  }
  if (feature_idx.empty()) throw DataError(DataErrc::Malformed, "CSV: no feature columns");
  if (target_idx.empty()) throw DataError(DataErrc::Malformed, "CSV: no target columns");

  Dataset ds;
  ds.name = std::move(name);
  ds.d = feature_idx.size();
  ds.d_o = target_idx.size();
  std::size_t row = 1;  // header is row 1
  std::vector<double> cells(header.size());
  while (std::getline(is, line)) {
    ++row;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << "CSV row " << row << ": expected " << header.size() << " cells, got " << fields.size();
      throw DataError(DataErrc::Malformed, os.str());
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      double v = 0.0;
      const char* begin = f.data();
      const char* end = f.data() + f.size();
      if (!f.empty() && *begin == '+') ++begin;
      const auto res = std::from_chars(begin, end, v);
      if (f.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        std::ostringstream os;
        os << "CSV row " << row << ", column " << (c + 1) << " ('" << header[c]
           << "'): malformed cell '" << f << "'";
        throw DataError(DataErrc::Malformed, os.str());
      }
      cells[c] = v;
    }
    Sample s{Vec(ds.d), Vec(ds.d_o)};
    for (std::size_t i = 0; i < ds.d; ++i) s.x[i] = cells[feature_idx[i]];
    for (std::size_t i = 0; i < ds.d_o; ++i) s.y[i] = cells[target_idx[i]];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_csv(const std::string& path, std::span<const std::string> target_columns,
                 std::string name) {
  std::ifstream is(path);
  if (!is) throw DataError(DataErrc::Io, "cannot open " + path);
  return parse_csv(is, target_columns, std::move(name));
}

void write_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t i = 0; i < ds.d; ++i) os << (i ? "," : "") << 'x' << i;
  for (std::size_t i = 0; i < ds.d_o; ++i) os << ",y" << i;
  os << '\n';
  char buf[40];
  for (const auto& s : ds.samples) {
    for (std::size_t i = 0; i < ds.d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.x[i]);
      os << (i ? "," : "") << buf;
    }
    for (std::size_t i = 0; i < ds.d_o; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.y[i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) throw DataError(DataErrc::Io, "cannot write " + path);
  write_csv(os, ds);
}

IdxImages read_idx_images(std::istream& is) {
  const auto magic = read_be32(is, "magic");
  if (magic != kIdxImagesMagic) {
    std::ostringstream os;
    os << "IDX images: bad magic 0x" << std::hex << magic;
    throw DataError(DataErrc::BadMagic, os.str());
  }
  IdxImages img;
  img.count = read_be32(is, "image count");
  img.rows = read_be32(is, "row count");
  img.cols = read_be32(is, "column count");
  const std::size_t n = std::size_t{img.count} * img.rows * img.cols;
  img.pixels.resize(n);
  if (n > 0 && !is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n))) {
    throw DataError(DataErrc::Truncated, "IDX images: truncated pixel data");
  }
  return img;
}

std::vector<std::uint8_t> read_idx_labels(std::istream& is) {
  const auto magic = read_be32(is, "magic");
  if (magic != kIdxLabelsMagic) {
    std::ostringstream os;
    os << "IDX labels: bad magic 0x" << std::hex << magic;
    throw DataError(DataErrc::BadMagic, os.str());
  }
  const auto count = read_be32(is, "label count");
  std::vector<std::uint8_t> labels(count);
  if (count > 0 && !is.read(reinterpret_cast<char*>(labels.data()), count)) {
    throw DataError(DataErrc::Truncated, "IDX labels: truncated label data");
  }
  return labels;
}

void write_idx_images(std::ostream& os, const IdxImages& images) {
  if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols) {
    throw DataError(DataErrc::CountMismatch, "IDX images: pixel buffer does not match dims");
  }
  write_be32(os, kIdxImagesMagic);
  write_be32(os, images.count);
  write_be32(os, images.rows);
  write_be32(os, images.cols);
  os.write(reinterpret_cast<const char*>(images.pixels.data()),
           static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(std::ostream& os, std::span<const std::uint8_t> labels) {
  write_be32(os, kIdxLabelsMagic);
  write_be32(os, static_cast<std::uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t classes, std::string name) {
  auto img_is = open_binary(images_path);
  auto lbl_is = open_binary(labels_path);
  const IdxImages img = read_idx_images(img_is);
  const auto labels = read_idx_labels(lbl_is);
  if (labels.size() != img.count) {
    std::ostringstream os;
    os << "IDX: " << img.count << " images but " << labels.size() << " labels";
    throw DataError(DataErrc::CountMismatch, os.str());
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.d = std::size_t{img.rows} * img.cols;
  ds.d_o = classes;
  ds.samples.reserve(img.count);
  for (std::size_t k = 0; k < img.count; ++k) {
    if (labels[k] >= classes) {
      throw DataError(DataErrc::Malformed, "IDX: label " + std::to_string(labels[k]) + " out of range");
    }
    Sample s{Vec(ds.d), Vec(classes)};
    const std::uint8_t* px = img.pixels.data() + k * ds.d;
    for (std::size_t i = 0; i < ds.d; ++i) s.x[i] = static_cast<double>(px[i]) / 255.0;
    s.y[labels[k]] = 1.0;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Normalization fit_normalization(const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("fit_normalization: empty dataset");
  Normalization norm{Vec(ds.d), Vec(ds.d)};
  const double n = static_cast<double>(ds.size());
  for (const auto& s : ds.samples)
    for (std::size_t i = 0; i < ds.d; ++i) norm.mean[i] += s.x[i];
  for (std::size_t i = 0; i < ds.d; ++i) norm.mean[i] /= n;
  for (const auto& s : ds.samples)
    for (std::size_t i = 0; i < ds.d; ++i) {
      const double c = s.x[i] - norm.mean[i];
      norm.stddev[i] += c * c;
    }
  for (std::size_t i = 0; i < ds.d; ++i) {
    const double sd = std::sqrt(norm.stddev[i] / n);
    // Constant features: clamp so they map to exactly zero.
    norm.stddev[i] = sd > 1e-12 * std::max(1.0, std::abs(norm.mean[i])) ? sd : 1.0;
  }
  return norm;
}

Dataset apply_normalization(const Dataset& ds, const Normalization& norm) {
  if (norm.mean.size() != ds.d || norm.stddev.size() != ds.d) {
    throw linalg::DimensionError("apply_normalization: statistics do not match feature count");
  }
  Dataset out = ds;
  for (auto& s : out.samples)
    for (std::size_t i = 0; i < ds.d; ++i) s.x[i] = (s.x[i] - norm.mean[i]) / norm.stddev[i];
  out.normalization = norm;
  return out;
}

Dataset standardize(const Dataset& ds) { return apply_normalization(ds, fit_normalization(ds)); }

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  // The small slack keeps exact products such as 0.8 * 645 from rounding up.
  auto n_train = static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(n) - 1e-9));
  n_train = std::min(n_train, n);
  Rng rng(derive_seed(spec.seed, "split"));
  const auto perm = rng.permutation(n);
  std::pair<Dataset, Dataset> out;
  for (Dataset* part : {&out.first, &out.second}) {
    part->name = ds.name;
    part->d = ds.d;
    part->d_o = ds.d_o;
    part->normalization = ds.normalization;
  }
  out.first.samples.reserve(n_train);
  out.second.samples.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_train ? out.first : out.second).samples.push_back(ds.samples[perm[k]]);
  }
  return out;
}

BatchStream::BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed, bool shuffle)
    : n_(n), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
  if (n == 0) throw std::invalid_argument("BatchStream: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("BatchStream: batch size must be >= 1");
}

void BatchStream::start_epoch() {
  ++epoch_;
  cursor_ = 0;
  if (shuffle_) {
    Rng rng(derive_seed(seed_, "shuffle", epoch_));
    order_ = rng.permutation(n_);
  } else {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
  }
  started_ = true;
}

std::vector<std::size_t> BatchStream::next_indices() {
  if (!started_ || cursor_ == order_.size()) start_epoch();
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return out;
}

model::Batch next_batch(BatchStream& stream, const Dataset& ds) {
  model::Batch batch;
  for (std::size_t i : stream.next_indices()) {
    if (i >= ds.size()) throw std::out_of_range("next_batch: stream does not match dataset");
    batch.emplace_back(ds.samples[i]);
  }
  return batch;
}

Synthetic gen_synthetic(const SynthSpec& spec) {
  if (spec.d == 0 || spec.hidden == 0 || spec.d_o == 0 || spec.n_samples == 0) {
    throw std::invalid_argument("gen_synthetic: dimensions must be positive");
  }
  model::SeparableModel planted = model::init_kaiming_uniform(
      {spec.d, spec.hidden, spec.d_o}, derive_seed(spec.seed, "planted"));
  Rng rng(derive_seed(spec.seed, "synthetic-samples"));
  Dataset ds;
  ds.name = "synthetic";
  ds.d = spec.d;
  ds.d_o = spec.d_o;
  ds.samples.reserve(spec.n_samples);
  for (std::size_t k = 0; k < spec.n_samples; ++k) {
    Sample s{Vec(spec.d), Vec(spec.d_o)};
    for (double& v : s.x) v = rng.normal();
    const auto f = model::forward(planted, s.x);
    for (std::size_t o = 0; o < spec.d_o; ++o) s.y[o] = f.yhat[o] + spec.noise_std * rng.normal();
    ds.samples.push_back(std::move(s));
  }
  return Synthetic{std::move(ds), std::move(planted)};
}

}  // namespace sepsa::data
