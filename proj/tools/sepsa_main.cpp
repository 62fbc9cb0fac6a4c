// sepsa command-line entry point.
//
//   sepsa train     [config flags] [--config FILE]
//   sepsa sweep     --lrs 1e-2,1e-3 --optimizers sepsa,adam [config flags] [--jobs N]
//   sepsa summarize results/*.jsonl
//   sepsa verify    [--seed N]
//   sepsa export-synth --out FILE [--d 8 --hidden 16 --outputs 1 --samples 2000 --noise 0.05 --seed 0]
//
// Exit codes: 0 success, 1 verify failure or runtime error, 2 usage or
// configuration error, 3 when every run finished but at least one diverged.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sepsa/checkpoint.hpp"
#include "sepsa/config.hpp"
#include "sepsa/data.hpp"
#include "sepsa/harness.hpp"
#include "sepsa/metrics.hpp"
#include "sepsa/verify.hpp"

namespace {

using sepsa::harness::ConfigError;
using sepsa::harness::ExperimentConfig;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

// Flag name, help text. Every flag maps onto the config key of the same name.
const std::vector<std::pair<std::string, std::string>> kConfigFlags = {
    {"dataset", "energy | diabetes | mnist | synthetic | csv"},
    {"data-dir", "dataset directory (default $SEPSA_DATA_DIR, then ./data)"},
    {"csv", "CSV file for --dataset csv"},
    {"targets", "comma-separated target columns for --dataset csv"},
    {"holdout-fraction", "share of rows dropped before splitting"},
    {"train-fraction", "training share of the remaining rows"},
    {"split-seed", "seed of the train/test split"},
    {"standardize-inputs", "true | false"},
    {"standardize-targets", "true | false"},
    {"synth-d", "synthetic input dimension"},
    {"synth-hidden", "synthetic planted hidden width"},
    {"synth-outputs", "synthetic output dimension"},
    {"synth-samples", "synthetic sample count"},
    {"synth-noise", "synthetic noise standard deviation"},
    {"optimizer", "sepsa | newton-head | sgd | nag | rmsprop | adam"},
    {"theta-updater", "extractor updater for sepsa: sgd | nag | rmsprop | adam"},
    {"lr", "learning rate (eta_0 of the decaying schedule)"},
    {"schedule", "constant | decaying"},
    {"tau", "decaying schedule time scale"},
    {"rho", "decaying schedule exponent in (0.5, 1]"},
    {"gamma-scale", "head step multiplier c"},
    {"beta-scale", "extractor step multiplier d"},
    {"hidden", "hidden width"},
    {"gain-scale", "initial RLS gain B0 = value * I"},
    {"batch-decay", "halve the RLS subset every epoch (true | false)"},
    {"batch-size", "samples per iteration"},
    {"epochs", "passes over the training set"},
    {"seed", "single seed"},
    {"seeds", "comma-separated seeds"},
    {"eval-every", "iterations between evaluations (0: dataset default)"},
    {"train-eval-limit", "rows used for intermediate train metrics (0: all)"},
    {"grad-norm", "log the full gradient norm at evaluations"},
    {"timing", "record wall-clock seconds (false writes 0)"},
    {"output", "metrics directory"},
    {"checkpoint-dir", "write final checkpoints here"},
};

struct ConfigInputs {
  std::map<std::string, std::string> flags;
  std::string config_file;
};

void add_config_flags(CLI::App* cmd, ConfigInputs& in) {
  for (const auto& [name, help] : kConfigFlags) {
    cmd->add_option_function<std::string>(
        "--" + name, [&in, key = name](const std::string& v) { in.flags[key] = v; }, help);
  }
  cmd->add_option("--config", in.config_file, "key = value file; its entries override flags")
      ->check(CLI::ExistingFile);
}

/// Flags first, then the config file. Keys in `extra` are handed back
/// instead of being applied to the config.
ExperimentConfig build_config(const ConfigInputs& in, std::map<std::string, std::string>* extra = nullptr) {
  ExperimentConfig cfg;
  for (const auto& name : kConfigFlags) {
    if (auto it = in.flags.find(name.first); it != in.flags.end()) cfg.set(it->first, it->second);
  }
  if (!in.config_file.empty()) {
    for (const auto& [key, value] : sepsa::harness::read_config_file(in.config_file)) {
      if (extra != nullptr && extra->contains(key)) {
        (*extra)[key] = value;
      } else {
        cfg.set(key, value);
      }
    }
  }
  cfg.validate();
  return cfg;
}

int report_runs(const std::vector<sepsa::harness::RunResult>& runs) {
  std::vector<sepsa::harness::RunOutcome> outcomes;
  bool any_diverged = false;
  for (const auto& r : runs) {
    outcomes.push_back(r.outcome);
    any_diverged = any_diverged || r.outcome.diverged;
    if (!r.jsonl_path.empty()) std::cout << "wrote " << r.csv_path << "\n";
  }
  sepsa::harness::print_summary(std::cout, sepsa::harness::summarize(outcomes));
  return any_diverged ? kExitDiverged : kExitOk;
}

std::vector<sepsa::harness::OptimizerKind> parse_optimizer_list(const std::string& s) {
  std::vector<sepsa::harness::OptimizerKind> out;
  for (const auto& name : sepsa::harness::split_list(s)) {
    const auto k = sepsa::harness::parse_optimizer(name);
    if (!k) throw ConfigError("unknown optimizer '" + name + "'");
    out.push_back(*k);
  }
  if (out.empty()) throw ConfigError("--optimizers is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Separable stochastic optimization toolkit"};
  app.require_subcommand(1);

  ConfigInputs train_in;
  auto* train = app.add_subcommand("train", "train one configuration over its seeds");
  add_config_flags(train, train_in);
  std::size_t train_jobs = 1;
  train->add_option("--jobs", train_jobs, "parallel seeds")->check(CLI::PositiveNumber);

  ConfigInputs sweep_in;
  std::string sweep_lrs = "1e-2,1e-3,1e-4";
  std::string sweep_opts = "sepsa,adam,sgd,nag,rmsprop";
  std::size_t sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "learning rates x optimizers x seeds");
  add_config_flags(sweep, sweep_in);
  sweep->add_option("--lrs", sweep_lrs, "comma-separated learning rates")->capture_default_str();
  sweep->add_option("--optimizers", sweep_opts, "comma-separated optimizers")->capture_default_str();
  sweep->add_option("--jobs", sweep_jobs, "parallel cells")->check(CLI::PositiveNumber);

  std::vector<std::string> summary_files;
  auto* summarize = app.add_subcommand("summarize", "fold metric files into a mean/std table");
  summarize->add_option("files", summary_files, "JSONL metric files")->required()->check(CLI::ExistingFile);

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "run the oracle checks");
  verify->add_option("--seed", verify_seed, "instance seed");

  std::string synth_out;
  std::string synth_planted;
  sepsa::data::SynthSpec synth;
  auto* export_synth = app.add_subcommand("export-synth", "write a synthetic dataset as CSV");
  export_synth->add_option("--out", synth_out, "output CSV")->required();
  export_synth->add_option("--planted", synth_planted, "also write the planted model checkpoint");
  export_synth->add_option("--d", synth.d, "input dimension")->capture_default_str();
  export_synth->add_option("--hidden", synth.hidden, "planted hidden width")->capture_default_str();
  export_synth->add_option("--outputs", synth.d_o, "output dimension")->capture_default_str();
  export_synth->add_option("--samples", synth.n_samples, "rows")->capture_default_str();
  export_synth->add_option("--noise", synth.noise_std, "noise standard deviation")->capture_default_str();
  export_synth->add_option("--seed", synth.seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) {
      const ExperimentConfig cfg = build_config(train_in);
      return report_runs(sepsa::harness::run_experiment(cfg, train_jobs));
    }
    if (*sweep) {
      std::map<std::string, std::string> extra{{"lrs", ""}, {"optimizers", ""}, {"jobs", ""}};
      const ExperimentConfig cfg = build_config(sweep_in, &extra);
      if (!extra["lrs"].empty()) sweep_lrs = extra["lrs"];
      if (!extra["optimizers"].empty()) sweep_opts = extra["optimizers"];
      if (!extra["jobs"].empty()) sweep_jobs = std::stoul(extra["jobs"]);
      const auto lrs = sepsa::harness::parse_double_list(sweep_lrs);
      if (lrs.empty()) throw ConfigError("--lrs is empty");
      return report_runs(
          sepsa::harness::run_sweep(cfg, lrs, parse_optimizer_list(sweep_opts), sweep_jobs));
    }
    if (*summarize) {
      std::vector<sepsa::harness::MetricsRecord> records;
      for (const auto& f : summary_files) {
        auto part = sepsa::harness::read_metrics_jsonl(f);
        records.insert(records.end(), part.begin(), part.end());
      }
      const auto outcomes = sepsa::harness::outcomes_from_records(records);
      sepsa::harness::print_summary(std::cout, sepsa::harness::summarize(outcomes));
      return kExitOk;
    }
    if (*verify) {
      const auto reports = sepsa::verify::run_default_suite(verify_seed);
      sepsa::verify::print_reports(std::cout, reports);
      for (const auto& r : reports)
        if (!r.pass) return kExitFailure;
      return kExitOk;
    }
    if (*export_synth) {
      const auto generated = sepsa::data::gen_synthetic(synth);
      sepsa::data::write_csv(synth_out, generated.data);
      if (!synth_planted.empty()) {
        sepsa::save_checkpoint(synth_planted, sepsa::Checkpoint{generated.planted, std::nullopt,
                                                                std::nullopt, 0});
      }
      std::cout << "wrote " << synth_out << " (" << generated.data.size() << " rows)\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sepsa::data::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
