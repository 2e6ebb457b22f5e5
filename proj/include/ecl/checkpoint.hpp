#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ecl/matrix.hpp"
#include "ecl/model.hpp"

namespace ecl::cli {

// Versioned binary checkpoint: parameter shapes plus row-major 64-bit values,
// loss-ledger tensors, and the canonical config text. save -> load -> save is
// byte-identical.
struct Checkpoint {
  std::string config_text;
  std::string arm;
  std::uint64_t seed = 0;
  model::MlpParameters params;
  std::vector<std::pair<std::string, Matrix>> ledger_tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ecl::cli
