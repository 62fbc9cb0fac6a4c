#pragma once

// Versioned text checkpoint of a model and, optionally, optimizer state.
// Floats are written as C99 hex literals so a save/load cycle is bit-exact.
//
//   sepsa-checkpoint 1
//   extractor <kind> <n> <layout...>
//   theta <q>        followed by q values
//   head <rows> <cols>   followed by rows*cols values
//   gain <p>         followed by p*p values (p = 0 when absent)
//   updater <kind> <timestep> <momentum> <rms_decay> <beta1> <beta2> <eps> <n1> <n2>
//                    followed by n1 + n2 values (line omitted when absent)
//   iteration <k>
//   end

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "sepsa/linalg.hpp"
#include "sepsa/model.hpp"
#include "sepsa/optim.hpp"

namespace sepsa {

struct Checkpoint {
  model::SeparableModel model;
  std::optional<linalg::SpdMat> gain;
  std::optional<optim::ThetaUpdater> updater;
  std::uint64_t iteration = 0;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Checkpoint capture(const model::SeparableModel& model, const optim::SepsaOptimizer& opt);

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sepsa
