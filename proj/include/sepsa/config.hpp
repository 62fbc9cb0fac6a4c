#pragma once

// Experiment configuration. Every field can be set from a CLI flag or from a
// key-value config file using the same key names:
//
//   # comment
//   dataset = energy
//   optimizer = sepsa
//   lr = 1e-3
//   seeds = 0,1,2

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sepsa::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { Sepsa, NewtonHead, Sgd, Nag, RmsProp, Adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

struct ExperimentConfig {
  // Data
  std::string dataset = "energy";  // energy | diabetes | mnist | synthetic | csv
  std::string data_dir;            // empty: $SEPSA_DATA_DIR, then ./data
  std::string csv_path;            // dataset = csv
  std::vector<std::string> targets;
  double holdout_fraction = -1.0;  // < 0: dataset default
  double train_fraction = -1.0;    // < 0: dataset default
  std::uint64_t split_seed = 0;
  std::optional<bool> standardize_inputs;  // unset: dataset default
  bool standardize_targets = false;

  // Synthetic data
  std::size_t synth_d = 8;
  std::size_t synth_hidden = 16;
  std::size_t synth_outputs = 1;
  std::size_t synth_samples = 2000;
  double synth_noise = 0.05;

  // Model and optimizer
  OptimizerKind optimizer = OptimizerKind::Sepsa;
  std::string theta_updater = "sgd";  // extractor updater for sepsa / newton-head
  double lr = 1e-3;  // constant step, or eta_0 of the decaying schedule
  std::string schedule = "constant";  // constant | decaying
  double tau = 1.0;
  double rho = 1.0;
  double gamma_scale = 1.0;  // c
  double beta_scale = 1.0;   // d
  std::size_t hidden = 50;
  double gain_scale = 100.0;  // B0 = gain_scale * I
  bool batch_decay = true;

  // Loop
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  std::vector<std::uint64_t> seeds{0};
  std::size_t eval_every = 0;        // 0: dataset default
  std::size_t train_eval_limit = 0;  // 0: whole training set
  bool grad_norm = false;
  bool timing = true;  // false writes seconds = 0 for byte-identical reruns

  // Output
  std::string output_dir = "results";
  std::string checkpoint_dir;  // empty: no checkpoints

  /// Parses and assigns one key; throws ConfigError on unknown keys or
  /// unparseable values.
  void set(std::string_view key, std::string_view value);
  /// Range checks that need the whole configuration.
  void validate() const;
};

/// `key = value` lines; blank lines and `#` comments are ignored.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& is);
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

std::vector<std::string> split_list(std::string_view s);
std::vector<double> parse_double_list(std::string_view s);

}  // namespace sepsa::harness
