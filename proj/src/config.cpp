#include "sepsa/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "sepsa/optim.hpp"

namespace sepsa::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  double out = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(out)) {
    throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("config: '" + std::string(key) + "' expects a non-negative integer, got '" + s + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ConfigError("config: '" + std::string(key) + "' expects a boolean, got '" + s + "'");
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sepsa: return "sepsa";
    case OptimizerKind::NewtonHead: return "newton-head";
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Nag: return "nag";
    case OptimizerKind::RmsProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::Sepsa, OptimizerKind::NewtonHead, OptimizerKind::Sgd,
                 OptimizerKind::Nag, OptimizerKind::RmsProp, OptimizerKind::Adam}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double("list", item));
  return out;
}

void ExperimentConfig::set(std::string_view raw_key, std::string_view value) {
  std::string key = trim(raw_key);
  for (char& c : key)
    if (c == '_') c = '-';
  const std::string v = trim(value);

  if (key == "dataset") dataset = v;
  else if (key == "data-dir") data_dir = v;
  else if (key == "csv") csv_path = v;
  else if (key == "targets") targets = split_list(v);
  else if (key == "holdout-fraction") holdout_fraction = to_double(key, v);
  else if (key == "train-fraction") train_fraction = to_double(key, v);
  else if (key == "split-seed") split_seed = to_u64(key, v);
  else if (key == "standardize-inputs") standardize_inputs = to_bool(key, v);
  else if (key == "standardize-targets") standardize_targets = to_bool(key, v);
  else if (key == "synth-d") synth_d = to_u64(key, v);
  else if (key == "synth-hidden") synth_hidden = to_u64(key, v);
  else if (key == "synth-outputs") synth_outputs = to_u64(key, v);
  else if (key == "synth-samples") synth_samples = to_u64(key, v);
  else if (key == "synth-noise") synth_noise = to_double(key, v);
  else if (key == "optimizer") {
    const auto k = parse_optimizer(v);
    if (!k) throw ConfigError("config: unknown optimizer '" + v + "'");
    optimizer = *k;
  } else if (key == "theta-updater") {
    if (!optim::parse_theta_kind(v)) throw ConfigError("config: unknown theta updater '" + v + "'");
    theta_updater = v;
  } else if (key == "lr") lr = to_double(key, v);
  else if (key == "schedule") {
    if (v != "constant" && v != "decaying") throw ConfigError("config: schedule must be constant or decaying");
    schedule = v;
  } else if (key == "tau") tau = to_double(key, v);
  else if (key == "rho") rho = to_double(key, v);
  else if (key == "gamma-scale") gamma_scale = to_double(key, v);
  else if (key == "beta-scale") beta_scale = to_double(key, v);
  else if (key == "hidden") hidden = to_u64(key, v);
  else if (key == "gain-scale" || key == "b0") gain_scale = to_double(key, v);
  else if (key == "batch-decay") batch_decay = to_bool(key, v);
  else if (key == "batch-size") batch_size = to_u64(key, v);
  else if (key == "epochs") epochs = to_u64(key, v);
  else if (key == "seed") seeds = {to_u64(key, v)};
  else if (key == "seeds") {
    seeds.clear();
    for (const auto& s : split_list(v)) seeds.push_back(to_u64(key, s));
  } else if (key == "eval-every") eval_every = to_u64(key, v);
  else if (key == "train-eval-limit") train_eval_limit = to_u64(key, v);
  else if (key == "grad-norm") grad_norm = to_bool(key, v);
  else if (key == "timing") timing = to_bool(key, v);
  else if (key == "output" || key == "output-dir") output_dir = v;
  else if (key == "checkpoint-dir") checkpoint_dir = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

void ExperimentConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  if (hidden < 1) throw ConfigError("config: hidden must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch-size must be >= 1");
  if (!(gain_scale > 0.0)) throw ConfigError("config: gain-scale must be > 0");
  if (train_fraction >= 0.0 && !(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("config: train-fraction must lie in (0, 1)");
  }
  if (holdout_fraction >= 1.0) throw ConfigError("config: holdout-fraction must be < 1");
  if (schedule == "decaying" && !(rho > 0.5 && rho <= 1.0)) {
    throw ConfigError("config: decaying schedule needs rho in (0.5, 1]");
  }
  if (dataset == "csv" && (csv_path.empty() || targets.empty())) {
    throw ConfigError("config: dataset=csv needs csv and targets");
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(line).substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  return parse_config_text(is);
}

}  // namespace sepsa::harness
