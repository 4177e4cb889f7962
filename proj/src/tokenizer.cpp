#include "sarc/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "sarc/error.hpp"

namespace sarc {

namespace {

const std::vector<std::string> kReserved = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

// Canonical spelling of a placeholder, or empty.
std::string_view placeholder(std::string_view word) {
    if (iequals(word, "@USER")) return "@USER";
    if (iequals(word, "<URL>")) return "<URL>";
    return {};
}

bool is_hashtag(std::string_view word) {
    return word.size() > 1 && word.front() == '#' && !is_punct(word[1]);
}

void split_word(std::string_view word, const TokenizerConfig& config, std::vector<std::string>& out) {
    std::string_view core = word;
    std::vector<std::string> trailing;
    while (!core.empty() && placeholder(core).empty() && is_punct(core.back())) {
        trailing.emplace_back(1, core.back());
        core.remove_suffix(1);
    }
    while (!core.empty() && placeholder(core).empty() && !is_hashtag(core) && is_punct(core.front())) {
        out.emplace_back(1, core.front());
        core.remove_prefix(1);
    }
    if (!core.empty()) {
        if (auto canon = placeholder(core); !canon.empty()) {
            out.emplace_back(canon);
        } else {
            std::string token(core);
            if (config.lowercase) {
                std::transform(token.begin(), token.end(), token.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            }
            out.push_back(std::move(token));
        }
    }
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

void TokenizerConfig::validate() const {
    if (min_freq < 1) throw Error(ErrorKind::InvalidArgument, "min_freq must be >= 1");
    if (max_vocab < 5) throw Error(ErrorKind::InvalidArgument, "max_vocab must be >= 5");
}

Vocabulary::Vocabulary() : Vocabulary(kReserved) {}

Vocabulary::Vocabulary(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
    if (id_to_token_.size() < kNumReserved ||
        !std::equal(kReserved.begin(), kReserved.end(), id_to_token_.begin()))
        throw Error(ErrorKind::Schema, "vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        if (id_to_token_[i].empty()) throw Error(ErrorKind::Schema, "empty vocabulary entry at id " + std::to_string(i));
        if (!token_to_id_.emplace(id_to_token_[i], static_cast<int>(i)).second)
            throw Error(ErrorKind::Schema, "duplicate vocabulary entry '" + id_to_token_[i] + "'");
    }
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw Error(ErrorKind::InvalidArgument, "token id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    for (const auto& t : id_to_token_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

std::vector<std::string> normalize_and_split(std::string_view text, const TokenizerConfig& config) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) split_word(text.substr(i, j - i), config, out);
        i = j;
    }
    return out;
}

Vocabulary train_vocab(std::span<const std::string> texts, const TokenizerConfig& config) {
    config.validate();
    std::map<std::string, std::size_t> freq;
    for (const auto& text : texts) {
        for (auto& tok : normalize_and_split(text, config)) ++freq[std::move(tok)];
    }

    std::vector<std::pair<std::string, std::size_t>> ranked;
    for (auto& [tok, n] : freq) {
        if (n >= config.min_freq && std::find(kReserved.begin(), kReserved.end(), tok) == kReserved.end())
            ranked.emplace_back(tok, n);
    }
    // std::map iteration is already lexicographic, so a stable sort on count keeps the tie-break.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens = kReserved;
    const std::size_t keep = std::min(ranked.size(), config.max_vocab - kNumReserved);
    for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
    return Vocabulary(std::move(tokens));
}

std::vector<int> encode(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
    return ids;
}

std::vector<std::string> decode(std::span<const int> ids, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(vocab.token_of(id));
    return out;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab, const TokenizerConfig& config) {
    auto tokens = normalize_and_split(text, config);
    return encode(tokens, vocab);
}

}  // namespace sarc
