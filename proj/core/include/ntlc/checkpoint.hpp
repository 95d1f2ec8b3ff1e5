#pragma once

#include <string>

#include "ntlc/model.hpp"

namespace ntlc {

/// Writes a self-describing, versioned JSON checkpoint: architecture, window
/// sizes, normalization statistics, seeds, training settings, per-epoch loss
/// history and every layer's parameters.
void save_checkpoint(const std::string& path, const TrainedModel& model);

/// Rebuilds a frozen model from a checkpoint. The layer stack is
/// reconstructed from the declared architecture and then checked layer by
/// layer against the file, so a corrupted or mismatched checkpoint fails
/// loudly instead of producing a silently different network.
TrainedModel load_checkpoint(const std::string& path);

}  // namespace ntlc
