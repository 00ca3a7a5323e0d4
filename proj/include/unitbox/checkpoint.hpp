#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "unitbox/network.hpp"

namespace unitbox {

// Checkpoint container, all integers little-endian:
//
//   bytes 0..7   magic "UNITBOX\0"
//   u32          format version (1)
//   u32          metadata length L, then L bytes of UTF-8 JSON
//                (holds "network": the NetworkConfig, plus "iteration" and
//                 an echo of the run configuration when written by training)
//   u32          tensor count T, then T records of:
//                  u32 name length, name bytes,
//                  u32 rank R, R x u32 dims,
//                  prod(dims) x f32 values (IEEE-754 binary32)

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    nlohmann::ordered_json meta;
    std::vector<NamedTensor> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Rounds every value to binary32, matching what a checkpoint stores.
std::vector<NamedTensor> round_to_f32(std::vector<NamedTensor> tensors);

/// Snapshot of a network with its config echoed into the metadata.
Checkpoint make_checkpoint(const UnitBoxNet& net, nlohmann::ordered_json extra_meta = nlohmann::ordered_json::object());

UnitBoxNet network_from_checkpoint(const Checkpoint& ckpt);
UnitBoxNet load_network(const std::filesystem::path& file);

}  // namespace unitbox
