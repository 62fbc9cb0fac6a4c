#include "sepsa/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace sepsa::harness {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_lr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

}  // namespace

std::string csv_header() {
  return "iteration,epoch,seed,optimizer,lr,train_mse,test_metric,grad_norm,seconds,status";
}

std::string to_csv_line(const MetricsRecord& r) {
  std::ostringstream os;
  os << r.iteration << ',' << r.epoch << ',' << r.seed << ',' << r.optimizer << ',' << fmt_lr(r.lr)
     << ',' << fmt_double(r.train_mse) << ',' << fmt_double(r.test_metric) << ','
     << (r.grad_norm ? fmt_double(*r.grad_norm) : "") << ',' << fmt_double(r.seconds) << ','
     << r.status;
  return os.str();
}

std::string to_json_line(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["optimizer"] = r.optimizer;
  j["lr"] = r.lr;
  j["seed"] = r.seed;
  j["iteration"] = r.iteration;
  j["epoch"] = r.epoch;
  j["train_mse"] = number_or_null(r.train_mse);
  j["test_metric"] = number_or_null(r.test_metric);
  j["test_metric_kind"] = r.test_is_accuracy ? "accuracy" : "mse";
  if (r.train_accuracy) j["train_accuracy"] = number_or_null(*r.train_accuracy);
  j["grad_norm"] = r.grad_norm ? number_or_null(*r.grad_norm) : nlohmann::json(nullptr);
  j["seconds"] = r.seconds;
  j["status"] = r.status;
  return j.dump();
}

std::optional<MetricsRecord> parse_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    MetricsRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.optimizer = j.at("optimizer").get<std::string>();
    r.lr = j.at("lr").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.iteration = j.at("iteration").get<std::uint64_t>();
    r.epoch = j.at("epoch").get<std::uint64_t>();
    r.train_mse = number_from(j.at("train_mse"));
    r.test_metric = number_from(j.at("test_metric"));
    r.test_is_accuracy = j.value("test_metric_kind", "mse") == "accuracy";
    if (j.contains("train_accuracy")) r.train_accuracy = number_from(j.at("train_accuracy"));
    if (!j.at("grad_norm").is_null()) r.grad_norm = j.at("grad_norm").get<double>();
    r.seconds = j.at("seconds").get<double>();
    r.status = j.at("status").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::vector<MetricsRecord> read_metrics_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read metrics file " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (auto r = parse_json_line(line)) out.push_back(std::move(*r));
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::string& stem)
    : jsonl_path_(stem + ".jsonl"), csv_path_(stem + ".csv"), jsonl_(jsonl_path_), csv_(csv_path_) {
  if (!jsonl_ || !csv_) throw std::runtime_error("cannot create metrics files at " + stem);
  csv_ << csv_header() << '\n';
  csv_.flush();
}

void MetricsWriter::write(const MetricsRecord& r) {
  jsonl_ << to_json_line(r) << '\n';
  jsonl_.flush();
  csv_ << to_csv_line(r) << '\n';
  csv_.flush();
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return {std::nan(""), std::nan("")};
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

SummaryTable summarize(std::span<const RunOutcome> runs) {
  using Key = std::tuple<std::string, std::string, double>;
  std::map<Key, std::vector<const RunOutcome*>> groups;
  std::vector<Key> order;
  for (const auto& r : runs) {
    Key key{r.dataset, r.optimizer, r.lr};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  SummaryTable table;
  for (const auto& key : order) {
    const auto& members = groups.at(key);
    SummaryRow row;
    std::tie(row.dataset, row.optimizer, row.lr) = key;
    std::vector<double> train, test, secs;
    for (const RunOutcome* r : members) {
      row.test_is_accuracy = row.test_is_accuracy || r->test_is_accuracy;
      if (r->diverged) {
        ++row.diverged;
        continue;
      }
      ++row.completed;
      train.push_back(r->train_mse);
      test.push_back(r->test_metric);
      secs.push_back(r->seconds);
    }
    row.train = mean_std(train);
    row.test = mean_std(test);
    row.seconds = mean_std(secs);
    table.push_back(std::move(row));
  }
  return table;
}

std::vector<RunOutcome> outcomes_from_records(std::span<const MetricsRecord> records) {
  using Key = std::tuple<std::string, std::string, double, std::uint64_t>;
  std::map<Key, const MetricsRecord*> last;
  std::vector<Key> order;
  for (const auto& r : records) {
    Key key{r.dataset, r.optimizer, r.lr, r.seed};
    auto [it, inserted] = last.try_emplace(key, &r);
    if (inserted) order.push_back(key);
    else if (r.iteration >= it->second->iteration) it->second = &r;
  }
  std::vector<RunOutcome> out;
  for (const auto& key : order) {
    const MetricsRecord& r = *last.at(key);
    out.push_back(RunOutcome{r.dataset, r.optimizer, r.lr, r.seed, r.train_mse, r.test_metric,
                             r.test_is_accuracy, r.seconds, r.status == "diverged"});
  }
  return out;
}

void print_summary(std::ostream& os, const SummaryTable& table) {
  os << std::left << std::setw(12) << "dataset" << std::setw(13) << "optimizer" << std::setw(9)
     << "lr" << std::setw(6) << "runs" << std::setw(9) << "diverged" << std::setw(26) << "train"
     << std::setw(26) << "test" << "time (s)\n";
  const auto cell = [](const MeanStd& m) {
    std::ostringstream c;
    c << std::setprecision(6) << m.mean << " +- " << std::setprecision(4) << m.stddev;
    return c.str();
  };
  for (const auto& row : table) {
    os << std::left << std::setw(12) << row.dataset << std::setw(13) << row.optimizer
       << std::setw(9) << fmt_lr(row.lr) << std::setw(6) << row.completed << std::setw(9)
       << row.diverged << std::setw(26) << (row.completed ? cell(row.train) : "-") << std::setw(26)
       << (row.completed ? cell(row.test) + (row.test_is_accuracy ? " acc" : "") : "-")
       << (row.completed ? cell(row.seconds) : "-") << '\n';
  }
}

}  // namespace sepsa::harness
