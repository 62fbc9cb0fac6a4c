#include "sepsa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include "sepsa/checkpoint.hpp"
#include "sepsa/optim.hpp"
#include "sepsa/rng.hpp"
#include "sepsa/verify.hpp"

namespace sepsa::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kRegressionHoldout = 0.16;
constexpr double kRegressionTrainFraction = 0.76;
constexpr double kDefaultTrainFraction = 0.8;
constexpr std::size_t kMnistEvalEvery = 500;

double pick(double configured, double fallback) { return configured >= 0.0 ? configured : fallback; }

/// Drops a seeded `holdout` share of the rows, then splits the rest.
std::pair<data::Dataset, data::Dataset> holdout_then_split(const data::Dataset& ds, double holdout,
                                                           double train_fraction,
                                                           std::uint64_t seed) {
  const data::Dataset* source = &ds;
  data::Dataset kept;
  if (holdout > 0.0) {
    kept = data::split(ds, {holdout, derive_seed(seed, "holdout")}).second;
    kept.name = ds.name;
    source = &kept;
  }
  return data::split(*source, {train_fraction, seed});
}

void standardize_inputs(LoadedData& out) {
  const data::Normalization norm = data::fit_normalization(out.train);
  out.train = data::apply_normalization(out.train, norm);
  out.test = data::apply_normalization(out.test, norm);
}

/// Targets are centred and scaled with training statistics (y only).
void standardize_targets(LoadedData& out) {
  const std::size_t d_o = out.train.d_o;
  const double n = static_cast<double>(out.train.size());
  std::vector<double> mean(d_o, 0.0), sd(d_o, 0.0);
  for (const auto& s : out.train.samples)
    for (std::size_t o = 0; o < d_o; ++o) mean[o] += s.y[o] / n;
  for (const auto& s : out.train.samples)
    for (std::size_t o = 0; o < d_o; ++o) sd[o] += (s.y[o] - mean[o]) * (s.y[o] - mean[o]) / n;
  for (double& v : sd) v = v > 0.0 ? std::sqrt(v) : 1.0;
  for (auto* ds : {&out.train, &out.test})
    for (auto& s : ds->samples)
      for (std::size_t o = 0; o < d_o; ++o) s.y[o] = (s.y[o] - mean[o]) / sd[o];
}

std::string fmt_lr(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", lr);
  return buf;
}

optim::StepSchedule make_schedule(const ExperimentConfig& cfg) {
  if (cfg.schedule == "decaying") {
    return optim::StepSchedule::decaying(cfg.lr, cfg.tau, cfg.rho, cfg.gamma_scale, cfg.beta_scale);
  }
  return optim::StepSchedule::constant(cfg.lr);
}

optim::ThetaKind baseline_kind(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sgd: return optim::ThetaKind::Sgd;
    case OptimizerKind::Nag: return optim::ThetaKind::Nag;
    case OptimizerKind::RmsProp: return optim::ThetaKind::RmsProp;
    case OptimizerKind::Adam: return optim::ThetaKind::Adam;
    default: break;
  }
  throw ConfigError("not a first-order optimizer: " + std::string(to_string(k)));
}

bool is_bad(double v) { return !std::isfinite(v) || v > kDivergenceThreshold; }

std::size_t eval_count(const data::Dataset& ds, std::size_t limit) {
  return limit == 0 ? ds.size() : std::min(limit, ds.size());
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::string resolve_data_dir(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("SEPSA_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return "data";
}

LoadedData load_dataset(const ExperimentConfig& cfg) {
  LoadedData out;
  const fs::path dir = resolve_data_dir(cfg);
  bool default_standardize = true;

  if (cfg.dataset == "energy" || cfg.dataset == "diabetes") {
    const bool energy = cfg.dataset == "energy";
    const std::vector<std::string> targets =
        !cfg.targets.empty() ? cfg.targets
        : energy             ? std::vector<std::string>{"Y1", "Y2"}
                             : std::vector<std::string>{"Y"};
    const auto path = dir / (cfg.dataset + ".csv");
    const data::Dataset all = data::load_csv(path.string(), targets, cfg.dataset);
    std::tie(out.train, out.test) =
        holdout_then_split(all, pick(cfg.holdout_fraction, kRegressionHoldout),
                           pick(cfg.train_fraction, kRegressionTrainFraction), cfg.split_seed);
  } else if (cfg.dataset == "mnist") {
    out.train = data::load_idx((dir / "train-images-idx3-ubyte").string(),
                               (dir / "train-labels-idx1-ubyte").string(), 10, "mnist");
    out.test = data::load_idx((dir / "t10k-images-idx3-ubyte").string(),
                              (dir / "t10k-labels-idx1-ubyte").string(), 10, "mnist");
    out.classification = true;
    out.eval_every = kMnistEvalEvery;
    default_standardize = false;
  } else if (cfg.dataset == "synthetic") {
    data::SynthSpec spec;
    spec.d = cfg.synth_d;
    spec.hidden = cfg.synth_hidden;
    spec.d_o = cfg.synth_outputs;
    spec.n_samples = cfg.synth_samples;
    spec.noise_std = cfg.synth_noise;
    spec.seed = cfg.split_seed;
    data::Dataset all = data::gen_synthetic(spec).data;
    all.name = "synthetic";
    std::tie(out.train, out.test) =
        holdout_then_split(all, pick(cfg.holdout_fraction, 0.0),
                           pick(cfg.train_fraction, kDefaultTrainFraction), cfg.split_seed);
    default_standardize = false;
  } else if (cfg.dataset == "csv") {
    const data::Dataset all = data::load_csv(cfg.csv_path, cfg.targets,
                                             fs::path(cfg.csv_path).stem().string());
    std::tie(out.train, out.test) =
        holdout_then_split(all, pick(cfg.holdout_fraction, 0.0),
                           pick(cfg.train_fraction, kDefaultTrainFraction), cfg.split_seed);
  } else {
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
  }

  if (cfg.standardize_inputs.value_or(default_standardize)) standardize_inputs(out);
  if (cfg.standardize_targets) standardize_targets(out);
  if (out.train.empty()) throw ConfigError("dataset '" + cfg.dataset + "' has no training rows");
  return out;
}

double mean_squared_error(const model::SeparableModel& m, const data::Dataset& ds,
                          std::size_t limit) {
  const std::size_t n = eval_count(ds, limit);
  if (n == 0) return std::nan("");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ds.samples[i];
    total += 2.0 * model::half_squared_error(s.y, model::forward(m, s.x).yhat);
  }
  return total / (static_cast<double>(n) * static_cast<double>(m.output_dim()));
}

double accuracy(const model::SeparableModel& m, const data::Dataset& ds, std::size_t limit) {
  const std::size_t n = eval_count(ds, limit);
  if (n == 0) return std::nan("");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = ds.samples[i];
    if (argmax(model::forward(m, s.x).yhat) == argmax(s.y)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::string run_stem(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::string name = cfg.dataset + "_" + std::string(to_string(cfg.optimizer)) + "_lr" +
                           fmt_lr(cfg.lr) + "_seed" + std::to_string(seed);
  return (fs::path(cfg.output_dir) / name).string();
}

RunResult run_single(const ExperimentConfig& cfg, const LoadedData& data, std::uint64_t seed,
                     bool write_files) {
  cfg.validate();
  const data::Dataset& train = data.train;
  model::SeparableModel model =
      model::init_kaiming_uniform({train.d, cfg.hidden, train.d_o}, seed);
  const optim::StepSchedule schedule = make_schedule(cfg);

  std::optional<optim::SepsaOptimizer> sepsa;
  std::optional<optim::FirstOrderOptimizer> baseline;
  if (cfg.optimizer == OptimizerKind::Sepsa || cfg.optimizer == OptimizerKind::NewtonHead) {
    const auto theta_kind = optim::parse_theta_kind(cfg.theta_updater);
    if (!theta_kind) throw ConfigError("unknown theta updater '" + cfg.theta_updater + "'");
    optim::HeadState head =
        cfg.optimizer == OptimizerKind::Sepsa
            ? optim::HeadState(optim::RlsState::with_scale(model.feature_dim(), cfg.gain_scale))
            : optim::HeadState(
                  optim::NewtonState::with_scale(model.feature_dim(), 1.0 / cfg.gain_scale));
    sepsa.emplace(std::move(head), optim::ThetaUpdater(*theta_kind, model.theta_size()), schedule,
                  optim::SepsaOptions{cfg.batch_decay, seed});
  } else {
    baseline.emplace(model, baseline_kind(cfg.optimizer), schedule);
  }

  std::optional<MetricsWriter> writer;
  const std::string stem = run_stem(cfg, seed);
  if (write_files) {
    if (!cfg.output_dir.empty()) fs::create_directories(cfg.output_dir);
    writer.emplace(stem);
  }

  data::BatchStream stream(train.size(), cfg.batch_size, derive_seed(seed, "stream"));
  const std::size_t total = cfg.epochs * stream.batches_per_epoch();
  const std::size_t every = cfg.eval_every != 0 ? cfg.eval_every : data.eval_every;

  std::vector<MetricsRecord> records;
  double seconds = 0.0;
  bool diverged = false;

  const auto emit = [&](std::uint64_t iteration, std::uint64_t epoch, bool final_tick) {
    MetricsRecord r;
    r.dataset = cfg.dataset;
    r.optimizer = std::string(to_string(cfg.optimizer));
    r.lr = cfg.lr;
    r.seed = seed;
    r.iteration = iteration;
    r.epoch = epoch;
    r.train_mse = mean_squared_error(model, train, final_tick ? 0 : cfg.train_eval_limit);
    r.test_is_accuracy = data.classification;
    if (data.classification) {
      r.test_metric = accuracy(model, data.test);
      r.train_accuracy = accuracy(model, train, final_tick ? 0 : cfg.train_eval_limit);
    } else {
      r.test_metric = mean_squared_error(model, data.test);
    }
    if (cfg.grad_norm) r.grad_norm = verify::full_grad_norm(model, train.samples);
    if (is_bad(r.train_mse)) diverged = true;
    r.seconds = cfg.timing ? seconds : 0.0;
    r.status = diverged ? "diverged" : (final_tick ? "done" : "ok");
    if (writer) writer->write(r);
    records.push_back(std::move(r));
  };

  for (std::size_t it = 1; it <= total; ++it) {
    const model::Batch batch = data::next_batch(stream, train);
    const std::size_t epoch = stream.epoch();
    const auto t0 = std::chrono::steady_clock::now();
    double batch_mse = 0.0;
    try {
      batch_mse = sepsa ? sepsa->step(model, batch, epoch).batch_mse
                        : baseline->step(model, batch).batch_mse;
    } catch (const linalg::NumericalError&) {
      diverged = true;
    }
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (is_bad(batch_mse) || !model.all_finite()) diverged = true;

    if (diverged) {
      emit(it, epoch, true);
      break;
    }
    if (it % every == 0 || it == total) emit(it, epoch, it == total);
  }

  if (!cfg.checkpoint_dir.empty() && write_files) {
    fs::create_directories(cfg.checkpoint_dir);
    const auto path = fs::path(cfg.checkpoint_dir) / (fs::path(stem).filename().string() + ".ckpt");
    if (sepsa) {
      save_checkpoint(path.string(), capture(model, *sepsa));
    } else {
      save_checkpoint(path.string(),
                      Checkpoint{model, std::nullopt, baseline->updater(), baseline->iteration()});
    }
  }

  RunOutcome outcome{cfg.dataset, std::string(to_string(cfg.optimizer)), cfg.lr, seed, 0.0, 0.0,
                     data.classification, 0.0, diverged};
  if (!records.empty()) {
    outcome.train_mse = records.back().train_mse;
    outcome.test_metric = records.back().test_metric;
    outcome.seconds = records.back().seconds;
  }
  RunResult result{std::move(records), outcome, std::move(model), {}, {}};
  if (writer) {
    result.jsonl_path = writer->jsonl_path();
    result.csv_path = writer->csv_path();
  }
  return result;
}

namespace {

struct Cell {
  ExperimentConfig cfg;
  std::uint64_t seed;
};

std::vector<RunResult> run_cells(const std::vector<Cell>& cells, const LoadedData& data,
                                 std::size_t jobs, bool write_files) {
  std::vector<std::optional<RunResult>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        slots[i].emplace(run_single(cells[i].cfg, data, cells[i].seed, write_files));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<RunResult> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, std::size_t jobs,
                                      bool write_files) {
  cfg.validate();
  const LoadedData data = load_dataset(cfg);
  std::vector<Cell> cells;
  for (std::uint64_t seed : cfg.seeds) cells.push_back({cfg, seed});
  return run_cells(cells, data, jobs, write_files);
}

std::vector<RunResult> run_sweep(const ExperimentConfig& base, const std::vector<double>& lrs,
                                 const std::vector<OptimizerKind>& optimizers, std::size_t jobs,
                                 bool write_files) {
  base.validate();
  const LoadedData data = load_dataset(base);
  std::vector<Cell> cells;
  for (double lr : lrs) {
    for (OptimizerKind opt : optimizers) {
      ExperimentConfig cfg = base;
      cfg.lr = lr;
      cfg.optimizer = opt;
      cfg.validate();
      for (std::uint64_t seed : cfg.seeds) cells.push_back({cfg, seed});
    }
  }
  return run_cells(cells, data, jobs, write_files);
}

}  // namespace sepsa::harness
