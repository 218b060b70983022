#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csm/data/dataset.hpp"
#include "csm/model/model.hpp"

namespace csm::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'M', 'C', 'K', 'P', 'T', '\0'};

/// Training provenance stored next to the parameters.
struct CheckpointInfo {
    data::Fingerprint dataset;  // generating rules are not stored
    std::size_t epochsTrained = 0;
    std::size_t bestEpoch = 0;
    double bestValLoss = 0.0;
    std::string failure;  // empty when training finished normally

    friend bool operator==(const CheckpointInfo&, const CheckpointInfo&) = default;
};

struct Checkpoint {
    model::CsmModel model;
    CheckpointInfo info;
};

/// Layout: magic, u32 version, u32 field count, fields, u64 FNV-1a of all
/// preceding bytes. A field is u16 name length, name, u8 type, u64 payload
/// length, payload. Integers are little-endian; doubles are IEEE-754 bit patterns.
std::vector<std::uint8_t> encodeCheckpoint(const model::CsmModel& m, const CheckpointInfo& info);
Checkpoint decodeCheckpoint(std::span<const std::uint8_t> bytes);

void saveCheckpoint(const std::filesystem::path& path, const model::CsmModel& m, const CheckpointInfo& info);
/// Throws FormatError, ChecksumError or VersionError.
Checkpoint loadCheckpoint(const std::filesystem::path& path);

/// Human-readable listing of hyperparameters and every parameter value.
void writeParameterDump(const std::filesystem::path& path, const model::CsmModel& m, const CheckpointInfo& info);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace csm::io
