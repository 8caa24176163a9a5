#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rulkit/loss_metrics.hpp"
#include "rulkit/nn_core.hpp"

namespace rulkit {

// A trained model plus everything needed to use it against new data: the
// architecture, the loss it was trained under, the seed, the feature order
// and the label cap.
struct Checkpoint {
    ModelParams params;
    LossConfig loss;
    std::uint64_t seed = 0;
    std::vector<std::string> feature_names;
    double max_rul = 130.0;
};

// Container layout (little-endian): "RKCP" magic, u32 format version,
// u64 JSON metadata length + bytes, u32 array count, then per array a
// length-prefixed name, u32 rank, u64 dims and raw doubles. Arrays appear in
// the canonical trainable order followed by the state arrays. Save/load
// round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rulkit
