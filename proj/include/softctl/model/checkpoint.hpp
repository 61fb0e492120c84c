#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "softctl/model/calibration.hpp"
#include "softctl/model/network.hpp"

namespace softctl::model {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to reuse a trained model: architecture, weights,
/// normalization, integration step and the calibrated error bound.
struct Checkpoint {
  ModelParams params;
  double dt = 0.0;
  ErrorBound bound;
};

/// Textual (JSON) encoding; doubles are written in shortest round-trip form
/// so save/load is exact.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& text);

/// Writes via a temporary file and rename. Throws CheckpointError on IO failure.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws CheckpointError when the file is unreadable, malformed, or (when
/// given) its state/control dimensions differ from the expected ones.
Checkpoint load_checkpoint(const std::string& path, std::optional<int> state_dim = std::nullopt,
                           std::optional<int> control_dim = std::nullopt);

}  // namespace softctl::model
