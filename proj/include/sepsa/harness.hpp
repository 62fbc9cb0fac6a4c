#pragma once

// Experiment runner: loads a dataset, trains one model per seed with the
// configured optimizer, evaluates on a cadence and writes per-run metric
// files named <output_dir>/<dataset>_<optimizer>_lr<lr>_seed<seed>.{jsonl,csv}.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sepsa/config.hpp"
#include "sepsa/data.hpp"
#include "sepsa/metrics.hpp"
#include "sepsa/model.hpp"

namespace sepsa::harness {

inline constexpr double kDivergenceThreshold = 1e12;

struct LoadedData {
  data::Dataset train;
  data::Dataset test;
  bool classification = false;
  std::size_t eval_every = 1;  // dataset default cadence
};

/// cfg.data_dir, else $SEPSA_DATA_DIR, else "data".
std::string resolve_data_dir(const ExperimentConfig& cfg);

/// Dataset defaults:
///   energy    energy.csv, targets Y1,Y2; 16% held out, then 76% train
///   diabetes  diabetes.csv, target Y; same fractions
///   mnist     IDX files, official train/test split, evaluation every 500 steps
///   synthetic planted generator (synth-* keys, split-seed), 80% train
///   csv       cfg.csv_path with cfg.targets, 80% train
/// Regression inputs are standardized with training statistics.
LoadedData load_dataset(const ExperimentConfig& cfg);

struct Evaluation {
  double train_mse = 0.0;
  double test_metric = 0.0;  // MSE, or accuracy for classification
  std::optional<double> train_accuracy;
};

/// ||y - yhat||^2 / d_o averaged over the first `limit` samples (all if 0).
double mean_squared_error(const model::SeparableModel& m, const data::Dataset& ds,
                          std::size_t limit = 0);
/// Fraction of samples whose argmax prediction matches the argmax target.
double accuracy(const model::SeparableModel& m, const data::Dataset& ds, std::size_t limit = 0);

struct RunResult {
  std::vector<MetricsRecord> records;
  RunOutcome outcome;
  model::SeparableModel final_model;
  std::string jsonl_path;
  std::string csv_path;
};

/// One (config, seed) cell. Files are written only when `write_files`.
RunResult run_single(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t seed,
                     bool write_files = true);

/// Every seed of `cfg`, up to `jobs` cells in parallel.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                      bool write_files = true);

/// Cross product lrs x optimizers x cfg.seeds over one loaded dataset.
std::vector<RunResult> run_sweep(const ExperimentConfig& base, const std::vector<double>& lrs,
                                 const std::vector<OptimizerKind>& optimizers, std::size_t jobs = 1,
                                 bool write_files = true);

std::string run_stem(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace sepsa::harness
