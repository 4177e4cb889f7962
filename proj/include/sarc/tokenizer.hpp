#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sarc {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr std::size_t kNumReserved = 4;

struct TokenizerConfig {
    bool lowercase = true;
    std::size_t min_freq = 2;
    std::size_t max_vocab = 20000;  // reserved ids included

    void validate() const;
};

/// Word-level vocabulary; ids 0..3 are PAD, UNK, CLS, SEP.
class Vocabulary {
   public:
    Vocabulary();
    explicit Vocabulary(std::vector<std::string> id_to_token);

    int id_of(std::string_view token) const;  // kUnkId when absent
    const std::string& token_of(int id) const;
    bool contains(std::string_view token) const;
    std::size_t size() const { return id_to_token_.size(); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    /// One token per line; line number is the id.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

   private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

/// Placeholders (@USER, <URL>) and hashtags survive as single tokens; other
/// words are lowercased and stripped of leading/trailing punctuation, which
/// is emitted one character per token.
std::vector<std::string> normalize_and_split(std::string_view text, const TokenizerConfig& config);

/// Keeps tokens seen at least min_freq times, ranked by frequency then
/// lexicographically, capped at max_vocab entries including reserved ones.
Vocabulary train_vocab(std::span<const std::string> texts, const TokenizerConfig& config);

std::vector<int> encode(std::span<const std::string> tokens, const Vocabulary& vocab);
std::vector<std::string> decode(std::span<const int> ids, const Vocabulary& vocab);

/// normalize_and_split followed by encode.
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab, const TokenizerConfig& config);

}  // namespace sarc
