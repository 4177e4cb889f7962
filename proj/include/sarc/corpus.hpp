#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sarc {

enum class Label { NotSarcasm = 0, Sarcasm = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

enum class Source { Twitter, Reddit, Mixed, Synthetic };

std::string_view to_string(Source source);

/// One conversation: the chronological context (oldest first) and the
/// target utterance (`response`) whose label is predicted.
struct ConversationThread {
    std::string id;
    std::vector<std::string> context;
    std::string response;
    std::optional<Label> label;

    bool operator==(const ConversationThread&) const = default;
};

struct Corpus {
    std::vector<ConversationThread> records;
    Source source = Source::Mixed;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

/// Reads the shared-task JSON-lines layout. Missing ids become
/// `<source>_<lineno>`; blank lines are skipped but still counted.
Corpus load_jsonl(const std::filesystem::path& path, Source source);

/// Source guessed from the file name ("twitter", "reddit", "synth"), else Mixed.
Source infer_source(const std::filesystem::path& path);

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Concatenates corpora; throws on id collisions.
Corpus combine(const Corpus& a, const Corpus& b);

struct DedupResult {
    Corpus corpus;
    std::size_t removed = 0;
};

/// Drops exact repeats of (response, context, label), compared after trimming
/// trailing whitespace. The first occurrence wins and order is preserved.
DedupResult deduplicate(const Corpus& corpus);

struct Split {
    Corpus train;
    Corpus dev;
};

/// Size of the dev portion: round-half-up(n * fraction).
std::size_t dev_size(std::size_t n, double dev_fraction);

/// Seeded uniform selection of whole threads; both halves keep corpus order.
Split split(const Corpus& corpus, double dev_fraction, std::uint64_t seed);

struct CorpusStats {
    std::size_t nc = 0;
    double au_mean = 0.0;
    double au_std = 0.0;
    double at_mean = 0.0;
    double at_std = 0.0;
};

/// Conversation counts, utterances per conversation (target included) and
/// whitespace tokens per utterance. Standard deviations are population ones.
CorpusStats compute_stats(const Corpus& corpus);

std::size_t whitespace_token_count(std::string_view text);

/// Balanced corpus whose label is carried only by a trigger token placed in
/// one context utterance. Targets are drawn independently of the label.
Corpus generate_synthetic(std::size_t n, std::uint64_t seed);

/// The trigger token used by generate_synthetic.
inline constexpr std::string_view kSyntheticTrigger = "#not";

/// Number of target templates generate_synthetic draws from.
std::size_t synthetic_template_count();

}  // namespace sarc
