#include "sarc/sequence.hpp"

#include <algorithm>

#include "sarc/error.hpp"

namespace sarc {

std::string_view to_string(InputMode mode) {
    return mode == InputMode::ContextAware ? "context" : "target";
}

InputMode parse_mode(std::string_view text) {
    if (text == "context" || text == "CONTEXT_AWARE") return InputMode::ContextAware;
    if (text == "target" || text == "TARGET_ORIENTED") return InputMode::TargetOriented;
    throw Error(ErrorKind::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

ModelInput build_target_input(std::span<const int> target_ids, std::size_t max_len) {
    if (max_len < 1) throw Error(ErrorKind::InvalidArgument, "max_len must be >= 1");
    const std::size_t n = std::min(target_ids.size(), max_len - 1);

    ModelInput in;
    in.mode = InputMode::TargetOriented;
    in.ids.reserve(n + 1);
    in.ids.push_back(kClsId);
    in.ids.insert(in.ids.end(), target_ids.begin(), target_ids.begin() + static_cast<std::ptrdiff_t>(n));
    in.mask.assign(in.ids.size(), 1);
    in.segment.assign(in.ids.size(), 0);
    return in;
}

ModelInput build_context_input(std::span<const int> target_ids, std::span<const std::vector<int>> context_ids,
                               std::size_t max_len, ContextTruncation truncation) {
    if (max_len < 2) throw Error(ErrorKind::InvalidArgument, "max_len must be >= 2");

    std::vector<int> context;
    for (const auto& utt : context_ids) context.insert(context.end(), utt.begin(), utt.end());

    const std::size_t n_target = std::min(target_ids.size(), max_len - 2);
    const std::size_t room = max_len - 2 - n_target;
    if (context.size() > room) {
        if (truncation == ContextTruncation::Tail) {
            context.resize(room);
        } else {
            context.erase(context.begin(), context.end() - static_cast<std::ptrdiff_t>(room));
        }
    }

    ModelInput in;
    in.mode = InputMode::ContextAware;
    in.ids.reserve(2 + n_target + context.size());
    in.ids.push_back(kClsId);
    in.ids.insert(in.ids.end(), target_ids.begin(), target_ids.begin() + static_cast<std::ptrdiff_t>(n_target));
    in.ids.push_back(kSepId);
    in.ids.insert(in.ids.end(), context.begin(), context.end());
    in.mask.assign(in.ids.size(), 1);
    in.segment.assign(in.ids.size(), 1);
    std::fill_n(in.segment.begin(), 1 + n_target, 0);
    return in;
}

Batch pad_batch(std::span<const ModelInput> inputs, std::optional<std::vector<int>> labels) {
    if (inputs.empty()) throw Error(ErrorKind::InvalidArgument, "cannot batch zero inputs");
    const InputMode mode = inputs.front().mode;
    std::size_t len = 0;
    for (const auto& in : inputs) {
        if (in.mode != mode) throw Error(ErrorKind::MixedMode, "batch mixes target-oriented and context-aware inputs");
        len = std::max(len, in.size());
    }
    if (labels && labels->size() != inputs.size())
        throw Error(ErrorKind::InvalidArgument, "label count does not match batch size");

    const auto rows = static_cast<Eigen::Index>(inputs.size());
    const auto cols = static_cast<Eigen::Index>(len);
    Batch batch;
    batch.mode = mode;
    batch.ids = IdMatrix::Constant(rows, cols, kPadId);
    batch.mask = IdMatrix::Zero(rows, cols);
    batch.segment = IdMatrix::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& in = inputs[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < in.size(); ++c) {
            const auto col = static_cast<Eigen::Index>(c);
            batch.ids(r, col) = in.ids[c];
            batch.mask(r, col) = in.mask[c];
            batch.segment(r, col) = in.segment[c];
        }
    }
    batch.labels = std::move(labels);
    return batch;
}

ModelInput build_input(const ConversationThread& thread, const Vocabulary& vocab, const TokenizerConfig& tok,
                       const SequenceConfig& seq) {
    auto target = tokenize(thread.response, vocab, tok);
    if (seq.mode == InputMode::TargetOriented) return build_target_input(target, seq.max_len_target);

    std::vector<std::vector<int>> context;
    context.reserve(thread.context.size());
    for (const auto& utt : thread.context) context.push_back(tokenize(utt, vocab, tok));
    return build_context_input(target, context, seq.max_len_context, seq.truncation);
}

}  // namespace sarc
