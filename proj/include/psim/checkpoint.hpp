#pragma once

// Versioned, checksummed binary snapshots of a training run: parameters,
// optimizer moments, RNG states, gate status, and the data cursor. Loading
// refuses config-hash or version mismatches unless explicitly overridden.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psim/optim.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

namespace psim {

// Position within the shuffled dataset plus the streams that drive shuffling
// and cropping, so a resumed run sees the same sample sequence.
struct DataCursor {
  std::vector<int32_t> order;  // current epoch permutation
  int64_t pos = 0;             // next index into order
  RngStream shuffle_rng{0};
  RngStream crop_rng{0};
};

struct NetBlob {
  std::map<std::string, Tensor> params;
  AdamState opt;
};

struct CheckpointData {
  uint64_t config_hash = 0;
  int64_t iteration = 0;
  double gate_threshold = 0.1;
  bool discriminator_active = true;
  bool has_discr = false;
  std::map<std::string, NetBlob> gen_parts;
  NetBlob discr;
  std::array<uint64_t, 4> dropout_state{};
  std::array<uint64_t, 4> eps_state{};
  DataCursor cursor;
};

// Captures everything adam/train_step mutate, plus the data cursor.
CheckpointData snapshot(const TrainState& state, uint64_t config_hash, const DataCursor& cursor);

// Writes parameters, moments, and RNG states back into a TrainState that was
// rebuilt from the same config. Shapes must match; errors name the mismatch.
void restore(const CheckpointData& data, TrainState& state, DataCursor& cursor);

// Atomic write (temp file + rename) with a trailing checksum.
void save_checkpoint(const std::string& path, const CheckpointData& data);

// Verifies magic, version, and checksum; refuses a config-hash mismatch
// unless allow_config_mismatch, naming both hashes.
CheckpointData load_checkpoint(const std::string& path, uint64_t expected_config_hash,
                               bool allow_config_mismatch = false);

}  // namespace psim
