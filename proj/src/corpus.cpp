#include "sarc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "sarc/error.hpp"

namespace sarc {

using nlohmann::json;

std::string_view to_string(Label label) {
    return label == Label::Sarcasm ? "SARCASM" : "NOT_SARCASM";
}

Label parse_label(std::string_view text) {
    if (text == "SARCASM") return Label::Sarcasm;
    if (text == "NOT_SARCASM") return Label::NotSarcasm;
    throw Error(ErrorKind::Schema, "unknown label '" + std::string(text) + "'");
}

std::string_view to_string(Source source) {
    switch (source) {
        case Source::Twitter:
            return "twitter";
        case Source::Reddit:
            return "reddit";
        case Source::Synthetic:
            return "synthetic";
        case Source::Mixed:
            break;
    }
    return "mixed";
}

Source infer_source(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name.find("twitter") != std::string::npos) return Source::Twitter;
    if (name.find("reddit") != std::string::npos) return Source::Reddit;
    if (name.find("synth") != std::string::npos) return Source::Synthetic;
    return Source::Mixed;
}

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void schema_error(std::size_t lineno, const std::string& msg) {
    throw Error(ErrorKind::Schema, "line " + std::to_string(lineno) + ": " + msg);
}

ConversationThread parse_record(const std::string& line, std::size_t lineno, Source source) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        schema_error(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) schema_error(lineno, "expected a JSON object");

    ConversationThread thread;
    auto response = obj.find("response");
    if (response == obj.end()) schema_error(lineno, "missing field 'response'");
    if (!response->is_string()) schema_error(lineno, "type error: 'response' must be a string");
    thread.response = response->get<std::string>();
    if (is_blank(thread.response)) schema_error(lineno, "'response' is empty");

    if (auto context = obj.find("context"); context != obj.end()) {
        if (!context->is_array()) schema_error(lineno, "type error: 'context' must be an array");
        for (const auto& utt : *context) {
            if (!utt.is_string()) schema_error(lineno, "type error: 'context' entries must be strings");
            thread.context.push_back(utt.get<std::string>());
        }
    }

    if (auto label = obj.find("label"); label != obj.end() && !label->is_null()) {
        if (!label->is_string()) schema_error(lineno, "type error: 'label' must be a string");
        try {
            thread.label = parse_label(label->get<std::string>());
        } catch (const Error& e) {
            schema_error(lineno, e.what());
        }
    }

    if (auto id = obj.find("id"); id != obj.end() && !id->is_null()) {
        if (!id->is_string()) schema_error(lineno, "type error: 'id' must be a string");
        thread.id = id->get<std::string>();
    } else {
        thread.id = std::string(to_string(source)) + "_" + std::to_string(lineno);
    }
    return thread;
}

}  // namespace

Corpus load_jsonl(const std::filesystem::path& path, Source source) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());

    Corpus corpus;
    corpus.source = source;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto thread = parse_record(line, lineno, source);
        if (!seen.insert(thread.id).second) schema_error(lineno, "duplicate id '" + thread.id + "'");
        corpus.records.push_back(std::move(thread));
    }
    return corpus;
}

void save_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    for (const auto& t : corpus.records) {
        json obj;
        obj["id"] = t.id;
        if (t.label) obj["label"] = to_string(*t.label);
        obj["response"] = t.response;
        obj["context"] = t.context;
        out << obj.dump() << '\n';
    }
}

Corpus combine(const Corpus& a, const Corpus& b) {
    Corpus out;
    out.source = a.source == b.source ? a.source : Source::Mixed;
    out.records = a.records;
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    std::unordered_set<std::string> seen;
    for (const auto& t : out.records) {
        if (!seen.insert(t.id).second)
            throw Error(ErrorKind::Schema, "duplicate id '" + t.id + "' across combined corpora");
    }
    return out;
}

DedupResult deduplicate(const Corpus& corpus) {
    // Parts are length-prefixed so the concatenated key is unambiguous.
    auto key_of = [](const ConversationThread& t) {
        std::string key;
        auto put = [&key](std::string_view part) {
            key += std::to_string(part.size());
            key += ':';
            key += part;
        };
        put(rtrim(t.response));
        key += std::to_string(t.context.size());
        key += '|';
        for (const auto& c : t.context) put(rtrim(c));
        key += t.label ? (*t.label == Label::Sarcasm ? 'S' : 'N') : '-';
        return key;
    };

    DedupResult result;
    result.corpus.source = corpus.source;
    std::unordered_set<std::string> seen;
    for (const auto& t : corpus.records) {
        if (seen.insert(key_of(t)).second) {
            result.corpus.records.push_back(t);
        } else {
            ++result.removed;
        }
    }
    return result;
}

std::size_t dev_size(std::size_t n, double dev_fraction) {
    if (!(dev_fraction >= 0.0 && dev_fraction < 1.0))
        throw Error(ErrorKind::InvalidArgument, "dev_fraction must lie in [0, 1)");
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * dev_fraction + 0.5));
}

Split split(const Corpus& corpus, double dev_fraction, std::uint64_t seed) {
    const std::size_t n = corpus.size();
    const std::size_t n_dev = dev_size(n, dev_fraction);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<bool> in_dev(n, false);
    for (std::size_t i = 0; i < n_dev; ++i) in_dev[order[i]] = true;

    Split out;
    out.train.source = corpus.source;
    out.dev.source = corpus.source;
    for (std::size_t i = 0; i < n; ++i) {
        (in_dev[i] ? out.dev : out.train).records.push_back(corpus.records[i]);
    }
    return out;
}

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        bool space = std::isspace(c);
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

namespace {

struct MeanStd {
    double mean;
    double std;
};

MeanStd population(const std::vector<double>& xs) {
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace

CorpusStats compute_stats(const Corpus& corpus) {
    if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "cannot compute stats of an empty corpus");

    std::vector<double> utterances;
    std::vector<double> tokens;
    utterances.reserve(corpus.size());
    for (const auto& t : corpus.records) {
        utterances.push_back(static_cast<double>(t.context.size() + 1));
        for (const auto& c : t.context) tokens.push_back(static_cast<double>(whitespace_token_count(c)));
        tokens.push_back(static_cast<double>(whitespace_token_count(t.response)));
    }
    auto au = population(utterances);
    auto at = population(tokens);
    return {corpus.size(), au.mean, au.std, at.mean, at.std};
}

namespace {

// Targets are neutral in isolation; the same pool serves both labels.
constexpr std::string_view kTargetTemplates[] = {
    "@USER well that is just great news",
    "@USER i really love mondays",
    "@USER sure , that will work out fine",
    "@USER what a wonderful idea this is",
    "@USER thanks for sharing this with us",
    "@USER i can not wait for the next one",
    "@USER this is exactly what we needed today",
    "@USER oh good , another meeting",
    "@USER best decision ever made",
    "@USER that explains everything",
    "@USER i am so glad you said that",
    "@USER nice to see the trains on time",
    "@USER love the new update",
    "@USER perfect timing as always",
    "@USER what could possibly go wrong",
    "@USER such a fun weekend",
};

constexpr std::string_view kFillerWords[] = {
    "the",     "game",   "last",    "night",   "was",     "on",      "tv",      "and",
    "people",  "kept",   "talking", "about",   "weather", "traffic", "coffee",  "prices",
    "city",    "council", "voted",  "for",     "new",     "parking", "rules",   "my",
    "phone",   "battery", "died",   "again",   "during",  "the",     "call",    "team",
    "won",     "match",  "after",   "extra",   "time",    "store",   "closed",  "early",
    "today",   "because", "of",     "storm",   "train",   "delayed", "twenty",  "minutes",
    "movie",   "review", "says",    "plot",    "is",      "slow",    "boss",    "moved",
    "deadline", "to",    "friday",  "<URL>",   "@USER",   "update",  "fixed",   "bug",
};

std::string filler_utterance(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> len(4, 8);
    std::uniform_int_distribution<std::size_t> pick(0, std::size(kFillerWords) - 1);
    std::string out;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) {
        if (i) out += ' ';
        out += kFillerWords[pick(rng)];
    }
    return out;
}

std::string insert_word(const std::string& utterance, std::string_view word, std::mt19937_64& rng) {
    std::vector<std::string> words;
    std::istringstream ss(utterance);
    for (std::string w; ss >> w;) words.push_back(w);
    std::uniform_int_distribution<std::size_t> at(0, words.size());
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), std::string(word));
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

}  // namespace

std::size_t synthetic_template_count() { return std::size(kTargetTemplates); }

Corpus generate_synthetic(std::size_t n, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0)
        throw Error(ErrorKind::InvalidArgument, "synthetic corpus size must be even and >= 2");

    std::mt19937_64 rng(seed);
    std::vector<Label> labels(n, Label::NotSarcasm);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n / 2), Label::Sarcasm);
    std::shuffle(labels.begin(), labels.end(), rng);

    std::uniform_int_distribution<std::size_t> pick_template(0, std::size(kTargetTemplates) - 1);
    std::uniform_int_distribution<std::size_t> context_len(1, 3);

    Corpus corpus;
    corpus.source = Source::Synthetic;
    corpus.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ConversationThread t;
        t.id = "synthetic_" + std::to_string(i + 1);
        t.label = labels[i];
        t.response = std::string(kTargetTemplates[pick_template(rng)]);
        const std::size_t k = context_len(rng);
        for (std::size_t j = 0; j < k; ++j) t.context.push_back(filler_utterance(rng));
        if (labels[i] == Label::Sarcasm) {
            std::uniform_int_distribution<std::size_t> which(0, k - 1);
            auto& utt = t.context[which(rng)];
            utt = insert_word(utt, kSyntheticTrigger, rng);
        }
        corpus.records.push_back(std::move(t));
    }
    return corpus;
}

}  // namespace sarc
