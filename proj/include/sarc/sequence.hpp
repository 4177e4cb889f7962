#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sarc/corpus.hpp"
#include "sarc/tokenizer.hpp"

namespace sarc {

enum class InputMode { TargetOriented, ContextAware };

std::string_view to_string(InputMode mode);
/// Accepts "target"/"context" as well as the enum spellings.
InputMode parse_mode(std::string_view text);

/// Which end of the concatenated context is cut on overflow.
enum class ContextTruncation { Tail, Head };

inline constexpr std::size_t kDefaultMaxLenTarget = 128;
inline constexpr std::size_t kDefaultMaxLenContext = 256;

struct ModelInput {
    std::vector<int> ids;
    std::vector<int> mask;
    std::vector<int> segment;
    InputMode mode = InputMode::TargetOriented;

    std::size_t size() const { return ids.size(); }
};

/// [CLS] ++ target, target cut from its tail to fit max_len.
ModelInput build_target_input(std::span<const int> target_ids, std::size_t max_len = kDefaultMaxLenTarget);

/// [CLS] ++ target ++ [SEP] ++ L_1 ++ ... ++ L_k. The context absorbs overflow
/// first; the target is cut only when [CLS] target [SEP] alone is too long.
ModelInput build_context_input(std::span<const int> target_ids, std::span<const std::vector<int>> context_ids,
                               std::size_t max_len = kDefaultMaxLenContext,
                               ContextTruncation truncation = ContextTruncation::Tail);

using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Batch {
    IdMatrix ids;
    IdMatrix mask;
    IdMatrix segment;
    std::optional<std::vector<int>> labels;
    InputMode mode = InputMode::TargetOriented;

    Eigen::Index rows() const { return ids.rows(); }
    Eigen::Index length() const { return ids.cols(); }
};

Batch pad_batch(std::span<const ModelInput> inputs, std::optional<std::vector<int>> labels = std::nullopt);

struct SequenceConfig {
    InputMode mode = InputMode::ContextAware;
    std::size_t max_len_target = kDefaultMaxLenTarget;
    std::size_t max_len_context = kDefaultMaxLenContext;
    ContextTruncation truncation = ContextTruncation::Tail;

    std::size_t max_len() const { return mode == InputMode::ContextAware ? max_len_context : max_len_target; }
};

/// Tokenizes a thread and builds the input for the configured mode.
ModelInput build_input(const ConversationThread& thread, const Vocabulary& vocab, const TokenizerConfig& tok,
                       const SequenceConfig& seq);

}  // namespace sarc
