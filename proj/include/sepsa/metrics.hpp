#pragma once

// Metric records and their two on-disk forms: line-delimited JSON (one
// object per line, appended and flushed per record) and a flat CSV with
// columns
//   iteration,epoch,seed,optimizer,lr,train_mse,test_metric,grad_norm,seconds,status
//
// train_mse and test MSE are ||y - yhat||^2 / d_o averaged over samples,
// i.e. twice the internal loss divided by the output dimension. For
// classification test_metric is accuracy in [0, 1].

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sepsa::harness {

struct MetricsRecord {
  std::string dataset;
  std::string optimizer;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  double train_mse = 0.0;
  double test_metric = 0.0;
  bool test_is_accuracy = false;
  std::optional<double> train_accuracy;
  std::optional<double> grad_norm;
  double seconds = 0.0;
  std::string status = "ok";  // ok | done | diverged
};

std::string csv_header();
std::string to_csv_line(const MetricsRecord& r);
std::string to_json_line(const MetricsRecord& r);
/// nullopt for lines that are not a complete record (e.g. a crash-truncated tail).
std::optional<MetricsRecord> parse_json_line(const std::string& line);

/// Every well-formed record in a JSONL file; malformed lines are skipped.
std::vector<MetricsRecord> read_metrics_jsonl(const std::string& path);

class MetricsWriter {
 public:
  /// Creates (truncating) `<stem>.jsonl` and `<stem>.csv`.
  explicit MetricsWriter(const std::string& stem);

  void write(const MetricsRecord& r);

  const std::string& jsonl_path() const { return jsonl_path_; }
  const std::string& csv_path() const { return csv_path_; }

 private:
  std::string jsonl_path_;
  std::string csv_path_;
  std::ofstream jsonl_;
  std::ofstream csv_;
};

// --- Multi-seed summary ----------------------------------------------------

struct RunOutcome {
  std::string dataset;
  std::string optimizer;
  double lr = 0.0;
  std::uint64_t seed = 0;
  double train_mse = 0.0;
  double test_metric = 0.0;
  bool test_is_accuracy = false;
  double seconds = 0.0;
  bool diverged = false;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct SummaryRow {
  std::string dataset;
  std::string optimizer;
  double lr = 0.0;
  std::size_t completed = 0;
  std::size_t diverged = 0;
  bool test_is_accuracy = false;
  MeanStd train;
  MeanStd test;
  MeanStd seconds;
};

using SummaryTable = std::vector<SummaryRow>;

/// Groups by (dataset, optimizer, lr); diverged runs are counted but excluded
/// from the means.
SummaryTable summarize(std::span<const RunOutcome> runs);

/// Final record of every (dataset, optimizer, lr, seed) run in `records`.
std::vector<RunOutcome> outcomes_from_records(std::span<const MetricsRecord> records);

void print_summary(std::ostream& os, const SummaryTable& table);

}  // namespace sepsa::harness
