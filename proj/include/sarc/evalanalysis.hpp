#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sarc/corpus.hpp"

namespace sarc {

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Counts with SARCASM as the positive class.
struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    bool operator==(const Confusion&) const = default;
};

struct Metrics {
    ClassScores sarcasm;
    ClassScores not_sarcasm;
    ClassScores macro;  // unweighted means of the two per-class scores
    double accuracy = 0.0;
    Confusion confusion;
};

/// Precision is 0 without positive predictions, recall 0 without gold
/// positives, and F1 is 0 when P + R = 0.
ClassScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

Metrics compute_metrics(std::span<const Label> preds, std::span<const Label> golds);

nlohmann::json to_json(const Metrics& m);

/// Shared-task LSTM-attention baselines (macro F1).
inline constexpr double kTwitterBaselineF1 = 0.670;
inline constexpr double kRedditBaselineF1 = 0.600;

struct BaselineDelta {
    double model_f1 = 0.0;
    double baseline_f1 = 0.0;
    double delta_points = 0.0;  // (model - baseline) * 100
};

BaselineDelta compare_to_baseline(double model_f1, double baseline_f1);
BaselineDelta compare_to_baseline(const Metrics& metrics, double baseline_f1);

/// TO = target-oriented model, CA = context-aware model; w/c = wrong/correct.
enum class ErrorCategory { TwCc = 0, TcCw = 1, TwCw = 2, TcCc = 3 };

inline constexpr std::array<ErrorCategory, 4> kErrorCategories = {ErrorCategory::TwCc, ErrorCategory::TcCw,
                                                                  ErrorCategory::TwCw, ErrorCategory::TcCc};

std::string_view to_string(ErrorCategory c);

ErrorCategory categorize(Label to_pred, Label ca_pred, Label gold);

struct ErrorAnalysis {
    std::array<std::size_t, 4> counts{};
    std::array<std::vector<std::size_t>, 4> examples;  // indices into the input order

    std::size_t count(ErrorCategory c) const { return counts[static_cast<std::size_t>(c)]; }
    const std::vector<std::size_t>& members(ErrorCategory c) const { return examples[static_cast<std::size_t>(c)]; }
};

ErrorAnalysis categorize_errors(std::span<const Label> to_preds, std::span<const Label> ca_preds,
                                std::span<const Label> golds, std::span<const ConversationThread> threads);

/// Counts plus, per category, the example ids.
nlohmann::json to_json(const ErrorAnalysis& analysis, std::span<const ConversationThread> threads);

/// Human-readable dump: per category, each thread as C_1..C_k lines then T.
std::string render_error_examples(const ErrorAnalysis& analysis, std::span<const ConversationThread> threads,
                                  std::span<const Label> to_preds, std::span<const Label> ca_preds,
                                  std::size_t max_per_category = 10);

/// Prediction files: one `<id>,<LABEL>` line per example, no header.
using Prediction = std::pair<std::string, Label>;
void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Reorders predictions to follow the corpus; every record must be covered.
std::vector<Label> align_predictions(std::span<const Prediction> predictions, const Corpus& corpus);

}  // namespace sarc
