#include "sarc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "sarc/digest.hpp"
#include "sarc/error.hpp"

namespace sarc {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'A', 'R', 'C', 'C', 'K', 'P', '1'};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

}  // namespace

json to_json(const EncoderConfig& c) {
    return {{"num_layers", c.num_layers}, {"num_heads", c.num_heads},         {"d_model", c.d_model},
            {"d_ff", c.d_ff},             {"vocab_size", c.vocab_size},       {"max_positions", c.max_positions},
            {"dropout", c.dropout},       {"use_segment", c.use_segment}};
}

json to_json(const SequenceConfig& c) {
    return {{"mode", to_string(c.mode)},
            {"max_len_target", c.max_len_target},
            {"max_len_context", c.max_len_context},
            {"truncation", c.truncation == ContextTruncation::Tail ? "tail" : "head"}};
}

json to_json(const TokenizerConfig& c) {
    return {{"lowercase", c.lowercase}, {"min_freq", c.min_freq}, {"max_vocab", c.max_vocab}};
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    c.num_layers = get_or(j, "num_layers", c.num_layers);
    c.num_heads = get_or(j, "num_heads", c.num_heads);
    c.d_model = get_or(j, "d_model", c.d_model);
    c.d_ff = get_or(j, "d_ff", c.d_ff);
    c.vocab_size = get_or(j, "vocab_size", c.vocab_size);
    c.max_positions = get_or(j, "max_positions", c.max_positions);
    c.dropout = get_or(j, "dropout", c.dropout);
    c.use_segment = get_or(j, "use_segment", c.use_segment);
    return c;
}

SequenceConfig sequence_config_from_json(const json& j) {
    SequenceConfig c;
    c.mode = parse_mode(get_or<std::string>(j, "mode", std::string(to_string(c.mode))));
    c.max_len_target = get_or(j, "max_len_target", c.max_len_target);
    c.max_len_context = get_or(j, "max_len_context", c.max_len_context);
    const auto trunc = get_or<std::string>(j, "truncation", "tail");
    if (trunc != "tail" && trunc != "head") throw Error(ErrorKind::Schema, "truncation must be 'tail' or 'head'");
    c.truncation = trunc == "tail" ? ContextTruncation::Tail : ContextTruncation::Head;
    return c;
}

TokenizerConfig tokenizer_config_from_json(const json& j) {
    TokenizerConfig c;
    c.lowercase = get_or(j, "lowercase", c.lowercase);
    c.min_freq = get_or(j, "min_freq", c.min_freq);
    c.max_vocab = get_or(j, "max_vocab", c.max_vocab);
    return c;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const auto tensors = ck.params.named();

    std::string vocab_text;
    for (const auto& t : ck.vocab.tokens()) vocab_text += t + "\n";

    json table = json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
        offset += t.size();
    }
    json header = {{"format_version", 1},
                   {"encoder", to_json(ck.encoder)},
                   {"sequence", to_json(ck.sequence)},
                   {"tokenizer", to_json(ck.tokenizer)},
                   {"vocabulary", ck.vocab.tokens()},
                   {"vocabulary_sha256", sha256_hex(vocab_text)},
                   {"seed", ck.seed},
                   {"epoch", ck.epoch},
                   {"tensors", table}};
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw Error(ErrorKind::MissingFile, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());

    char magic[8];
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw Error(ErrorKind::Schema, path.string() + " is not a checkpoint");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error(ErrorKind::Schema, "truncated checkpoint header in " + path.string());

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("bad checkpoint header: ") + e.what());
    }
    if (header.value("format_version", 0) != 1) throw Error(ErrorKind::Schema, "unsupported checkpoint version");

    Checkpoint ck;
    ck.encoder = encoder_config_from_json(header.at("encoder"));
    ck.sequence = sequence_config_from_json(header.at("sequence"));
    ck.tokenizer = tokenizer_config_from_json(header.at("tokenizer"));
    ck.vocab = Vocabulary(header.at("vocabulary").get<std::vector<std::string>>());
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<std::size_t>();
    ck.params = EncoderParams::init(ck.encoder, 0);

    std::map<std::string, Tensor> by_name;
    for (auto& [name, t] : ck.params.named()) by_name.emplace(name, t);

    const auto& table = header.at("tensors");
    if (table.size() != by_name.size()) throw Error(ErrorKind::Schema, "checkpoint tensor count mismatch");
    std::size_t expected_offset = 0;
    for (const auto& entry : table) {
        const auto name = entry.at("name").get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw Error(ErrorKind::Schema, "unexpected tensor '" + name + "'");
        Tensor& t = it->second;
        if (entry.at("shape").get<Shape>() != t.shape())
            throw Error(ErrorKind::Schema, "shape mismatch for tensor '" + name + "'");
        if (entry.at("offset").get<std::size_t>() != expected_offset)
            throw Error(ErrorKind::Schema, "tensor '" + name + "' is not stored contiguously");
        expected_offset += t.size();
        in.read(reinterpret_cast<char*>(t.values().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw Error(ErrorKind::Schema, "truncated payload for tensor '" + name + "'");
    }
    return ck;
}

}  // namespace sarc
