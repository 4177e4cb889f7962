#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "sarc/encoder.hpp"
#include "sarc/sequence.hpp"
#include "sarc/tokenizer.hpp"

namespace sarc {

/// Everything needed to run inference on raw threads.
///
/// On-disk layout (all integers little-endian):
///
///   bytes 0..7    magic "SARCCKP1"
///   bytes 8..15   uint64 header length H
///   next H bytes  UTF-8 JSON header: configs, vocabulary, seed, epoch and a
///                 tensor table [{name, shape, offset, count}] where offset
///                 and count are measured in float64 elements
///   remainder     float64 payload, tensors back to back in table order
///
/// Payloads are raw IEEE-754 bytes, so save/load round-trips bit-exactly.
struct Checkpoint {
    EncoderConfig encoder;
    SequenceConfig sequence;
    TokenizerConfig tokenizer;
    Vocabulary vocab;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    EncoderParams params;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const EncoderConfig& config);
nlohmann::json to_json(const SequenceConfig& config);
nlohmann::json to_json(const TokenizerConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
SequenceConfig sequence_config_from_json(const nlohmann::json& j);
TokenizerConfig tokenizer_config_from_json(const nlohmann::json& j);

}  // namespace sarc
