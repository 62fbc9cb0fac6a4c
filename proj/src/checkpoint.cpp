#include "sepsa/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace sepsa {

namespace {

constexpr const char* kMagic = "sepsa-checkpoint";
constexpr int kVersion = 1;

void write_values(std::ostream& os, std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", values[i]);
    os << (i == 0 ? "" : " ") << buf;
  }
  os << '\n';
}

double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw CheckpointError("checkpoint: bad number '" + tok + "'");
  return v;
}

std::vector<double> read_values(std::istream& is, std::size_t n) {
  std::vector<double> out(n);
  std::string tok;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(is >> tok)) throw CheckpointError("checkpoint: truncated value block");
    out[i] = parse_double(tok);
  }
  return out;
}

void expect(std::istream& is, const std::string& keyword) {
  std::string tok;
  if (!(is >> tok) || tok != keyword) {
    throw CheckpointError("checkpoint: expected '" + keyword + "', got '" + tok + "'");
  }
}

template <typename T>
T read_scalar(std::istream& is, const char* what) {
  T v{};
  if (!(is >> v)) throw CheckpointError(std::string("checkpoint: cannot read ") + what);
  return v;
}

}  // namespace

Checkpoint capture(const model::SeparableModel& model, const optim::SepsaOptimizer& opt) {
  Checkpoint ck{model, std::nullopt, opt.theta_updater(), opt.iteration()};
  if (const auto* rls = std::get_if<optim::RlsState>(&opt.head_state())) ck.gain = rls->b;
  return ck;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  const auto& ex = ck.model.extractor();
  const auto layout = ex.layout();
  os << kMagic << ' ' << kVersion << '\n';
  os << "extractor " << ex.kind() << ' ' << layout.size();
  for (std::size_t v : layout) os << ' ' << v;
  os << '\n';
  os << "theta " << ck.model.theta_size() << '\n';
  write_values(os, ck.model.theta());
  os << "head " << ck.model.head().rows() << ' ' << ck.model.head().cols() << '\n';
  write_values(os, ck.model.head().flat());
  if (ck.gain) {
    os << "gain " << ck.gain->size() << '\n';
    write_values(os, ck.gain->mat().flat());
  } else {
    os << "gain 0\n";
  }
  if (ck.updater) {
    const auto& u = *ck.updater;
    const auto& hp = u.hyper();
    char buf[256];
    std::snprintf(buf, sizeof buf, "%a %a %a %a %a", hp.momentum, hp.rms_decay, hp.beta1,
                  hp.beta2, hp.eps);
    os << "updater " << optim::to_string(u.kind()) << ' ' << u.timestep() << ' ' << buf << ' '
       << u.first().size() << ' ' << u.second().size() << '\n';
    write_values(os, u.first());
    write_values(os, u.second());
  }
  os << "iteration " << ck.iteration << '\n';
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  expect(is, kMagic);
  const int version = read_scalar<int>(is, "version");
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  expect(is, "extractor");
  const auto kind = read_scalar<std::string>(is, "extractor kind");
  const auto n_layout = read_scalar<std::size_t>(is, "layout size");
  std::vector<std::size_t> layout(n_layout);
  for (auto& v : layout) v = read_scalar<std::size_t>(is, "layout");
  auto extractor = model::make_extractor(kind, layout);

  expect(is, "theta");
  const auto q = read_scalar<std::size_t>(is, "theta size");
  if (q != extractor->params().size()) throw CheckpointError("checkpoint: theta size mismatch");
  const auto theta = read_values(is, q);
  std::copy(theta.begin(), theta.end(), extractor->params().begin());

  expect(is, "head");
  const auto rows = read_scalar<std::size_t>(is, "head rows");
  const auto cols = read_scalar<std::size_t>(is, "head cols");
  linalg::Mat head(rows, cols, read_values(is, rows * cols));
  Checkpoint ck{model::SeparableModel(std::move(extractor), std::move(head)), std::nullopt,
                std::nullopt, 0};

  expect(is, "gain");
  const auto p = read_scalar<std::size_t>(is, "gain size");
  if (p > 0) ck.gain = linalg::SpdMat(linalg::Mat(p, p, read_values(is, p * p)));

  std::string tok = read_scalar<std::string>(is, "section");
  if (tok == "updater") {
    const auto kname = read_scalar<std::string>(is, "updater kind");
    const auto tkind = optim::parse_theta_kind(kname);
    if (!tkind) throw CheckpointError("checkpoint: unknown updater kind " + kname);
    const auto t = read_scalar<std::uint64_t>(is, "timestep");
    const auto hp_vals = read_values(is, 5);
    optim::ThetaHyper hp{hp_vals[0], hp_vals[1], hp_vals[2], hp_vals[3], hp_vals[4]};
    const auto n1 = read_scalar<std::size_t>(is, "buffer size");
    const auto n2 = read_scalar<std::size_t>(is, "buffer size");
    auto first = read_values(is, n1);
    auto second = read_values(is, n2);
    ck.updater = optim::ThetaUpdater::restore(*tkind, hp, t, linalg::Vec(std::move(first)),
                                              linalg::Vec(std::move(second)));
    tok = read_scalar<std::string>(is, "section");
  }
  if (tok != "iteration") throw CheckpointError("checkpoint: expected 'iteration', got '" + tok + "'");
  ck.iteration = read_scalar<std::uint64_t>(is, "iteration");
  expect(is, "end");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, ck);
  if (!os) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace sepsa
