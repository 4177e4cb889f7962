#include "sarc/encoder.hpp"

#include <cmath>

#include "sarc/error.hpp"

namespace sarc {

void EncoderConfig::validate() const {
    if (num_layers < 1) throw Error(ErrorKind::InvalidArgument, "num_layers must be >= 1");
    if (num_heads < 1 || d_model % num_heads != 0)
        throw Error(ErrorKind::InvalidArgument, "d_model must be divisible by num_heads");
    if (d_ff < 1) throw Error(ErrorKind::InvalidArgument, "d_ff must be >= 1");
    if (vocab_size < kNumReserved) throw Error(ErrorKind::InvalidArgument, "vocab_size must cover the reserved tokens");
    if (max_positions < 1) throw Error(ErrorKind::InvalidArgument, "max_positions must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::InvalidArgument, "dropout must lie in [0, 1)");
}

namespace {

Tensor normal(Shape shape, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 0.02);
    Tensor t(std::move(shape), true);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

Tensor zeros(Shape shape) { return Tensor(std::move(shape), true); }

Tensor ones(std::size_t n) { return Tensor({n}, std::vector<double>(n, 1.0), true); }

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    const std::size_t d = config.d_model;

    EncoderParams p;
    p.token_embedding = normal({config.vocab_size, d}, rng);
    p.position_embedding = normal({config.max_positions, d}, rng);
    p.segment_embedding = normal({2, d}, rng);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        LayerParams layer;
        layer.wq = normal({d, d}, rng);
        layer.bq = zeros({d});
        layer.wk = normal({d, d}, rng);
        layer.bk = zeros({d});
        layer.wv = normal({d, d}, rng);
        layer.bv = zeros({d});
        layer.wo = normal({d, d}, rng);
        layer.bo = zeros({d});
        layer.ln1_gain = ones(d);
        layer.ln1_bias = zeros({d});
        layer.ff1_w = normal({d, config.d_ff}, rng);
        layer.ff1_b = zeros({config.d_ff});
        layer.ff2_w = normal({config.d_ff, d}, rng);
        layer.ff2_b = zeros({d});
        layer.ln2_gain = ones(d);
        layer.ln2_bias = zeros({d});
        p.layers.push_back(std::move(layer));
    }
    p.decoder_weight = normal({d, 2}, rng);
    p.decoder_bias = zeros({2});
    return p;
}

namespace {

template <typename Params>
auto collect(Params& p) {
    std::vector<std::pair<std::string, Tensor>> out{
        {"embeddings.token", p.token_embedding},
        {"embeddings.position", p.position_embedding},
        {"embeddings.segment", p.segment_embedding},
    };
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string pre = "layers." + std::to_string(l) + ".";
        auto& L = p.layers[l];
        for (auto& [name, t] : std::initializer_list<std::pair<const char*, const Tensor*>>{
                 {"attn.wq", &L.wq},       {"attn.bq", &L.bq},       {"attn.wk", &L.wk},     {"attn.bk", &L.bk},
                 {"attn.wv", &L.wv},       {"attn.bv", &L.bv},       {"attn.wo", &L.wo},     {"attn.bo", &L.bo},
                 {"ln1.gain", &L.ln1_gain}, {"ln1.bias", &L.ln1_bias}, {"ff1.w", &L.ff1_w},    {"ff1.b", &L.ff1_b},
                 {"ff2.w", &L.ff2_w},      {"ff2.b", &L.ff2_b},      {"ln2.gain", &L.ln2_gain}, {"ln2.bias", &L.ln2_bias},
             }) {
            out.emplace_back(pre + name, *t);
        }
    }
    out.emplace_back("decoder.weight", p.decoder_weight);
    out.emplace_back("decoder.bias", p.decoder_bias);
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> EncoderParams::named() { return collect(*this); }
std::vector<std::pair<std::string, Tensor>> EncoderParams::named() const { return collect(*this); }

EncoderParams EncoderParams::clone() const {
    EncoderParams c;
    c.token_embedding = token_embedding.clone();
    c.position_embedding = position_embedding.clone();
    c.segment_embedding = segment_embedding.clone();
    for (const auto& L : layers) {
        c.layers.push_back({L.wq.clone(), L.bq.clone(), L.wk.clone(), L.bk.clone(), L.wv.clone(), L.bv.clone(),
                            L.wo.clone(), L.bo.clone(), L.ln1_gain.clone(), L.ln1_bias.clone(), L.ff1_w.clone(),
                            L.ff1_b.clone(), L.ff2_w.clone(), L.ff2_b.clone(), L.ln2_gain.clone(),
                            L.ln2_bias.clone()});
    }
    c.decoder_weight = decoder_weight.clone();
    c.decoder_bias = decoder_bias.clone();
    return c;
}

void EncoderParams::zero_grad() {
    for (auto& [name, t] : named()) t.zero_grad();
}

RowMatrix EncoderOutput::attention_matrix(std::size_t layer, std::size_t example, std::size_t head) const {
    const Tensor& a = attention.at(layer);
    const std::size_t heads = a.dim(1), len = a.dim(2);
    if (example >= a.dim(0) || head >= heads) throw Error(ErrorKind::InvalidArgument, "attention index out of range");
    const std::size_t offset = (example * heads + head) * len * len;
    return ConstMatrixMap(a.values().data() + offset, static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len));
}

std::span<const double> EncoderOutput::logits_of(std::size_t example) const {
    return logits.values().subspan(example * 2, 2);
}

Tensor mask_tensor(const Batch& batch) {
    const auto b = static_cast<std::size_t>(batch.rows());
    const auto len = static_cast<std::size_t>(batch.length());
    Tensor m({b, len});
    m.matrix() = batch.mask.cast<double>();
    return m;
}

Tensor embed(Tape& tape, const Batch& batch, const EncoderParams& params, const EncoderConfig& config,
             std::mt19937_64* dropout_rng) {
    const auto b = static_cast<std::size_t>(batch.rows());
    const auto len = static_cast<std::size_t>(batch.length());
    if (len > config.max_positions)
        throw Error(ErrorKind::InvalidArgument, "sequence length " + std::to_string(len) + " exceeds max_positions " +
                                                    std::to_string(config.max_positions));
    const Shape index_shape{b, len};
    std::span<const int> ids(batch.ids.data(), b * len);

    std::vector<int> positions(b * len);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < len; ++j) positions[i * len + j] = static_cast<int>(j);
    }

    Tensor x = add(tape, embedding_lookup(tape, params.token_embedding, ids, index_shape),
                   embedding_lookup(tape, params.position_embedding, positions, index_shape));
    if (config.use_segment) {
        std::span<const int> segments(batch.segment.data(), b * len);
        x = add(tape, x, embedding_lookup(tape, params.segment_embedding, segments, index_shape));
    }
    if (dropout_rng) x = dropout(tape, x, config.dropout, *dropout_rng);
    return x;
}

namespace {

// [b, L, d] -> [b, heads, L, head_dim]
Tensor split_heads(Tape& tape, const Tensor& x, std::size_t heads) {
    const std::size_t b = x.dim(0), len = x.dim(1), d = x.dim(2);
    static constexpr std::size_t order[] = {0, 2, 1, 3};
    return permute(tape, reshape(tape, x, {b, len, heads, d / heads}), order);
}

// [b, heads, L, head_dim] -> [b, L, d]
Tensor merge_heads(Tape& tape, const Tensor& x) {
    const std::size_t b = x.dim(0), heads = x.dim(1), len = x.dim(2), hd = x.dim(3);
    static constexpr std::size_t order[] = {0, 2, 1, 3};
    return reshape(tape, permute(tape, x, order), {b, len, heads * hd});
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
    return add(tape, matmul(tape, x, w), bias);
}

}  // namespace

EncoderOutput encoder_forward(Tape& tape, const Batch& batch, const EncoderParams& params,
                              const EncoderConfig& config, bool training, std::mt19937_64* dropout_rng) {
    if (training && config.dropout > 0.0 && !dropout_rng)
        throw Error(ErrorKind::InvalidArgument, "training with dropout needs an rng");
    std::mt19937_64* rng = training ? dropout_rng : nullptr;
    auto drop = [&](const Tensor& t) { return rng ? dropout(tape, t, config.dropout, *rng) : t; };

    const Tensor mask = mask_tensor(batch);
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(config.head_dim()));

    EncoderOutput out;
    Tensor x = embed(tape, batch, params, config, rng);
    for (const auto& L : params.layers) {
        Tensor q = split_heads(tape, linear(tape, x, L.wq, L.bq), config.num_heads);
        Tensor k = split_heads(tape, linear(tape, x, L.wk, L.bk), config.num_heads);
        Tensor v = split_heads(tape, linear(tape, x, L.wv, L.bv), config.num_heads);

        Tensor scores = scale(tape, matmul(tape, q, transpose(tape, k)), score_scale);
        Tensor weights = softmax_masked(tape, scores, mask);
        out.attention.push_back(weights);

        Tensor context = merge_heads(tape, matmul(tape, weights, v));
        Tensor attended = drop(linear(tape, context, L.wo, L.bo));
        x = layer_norm(tape, add(tape, x, attended), L.ln1_gain, L.ln1_bias);

        Tensor ff = linear(tape, gelu(tape, linear(tape, x, L.ff1_w, L.ff1_b)), L.ff2_w, L.ff2_b);
        x = layer_norm(tape, add(tape, x, drop(ff)), L.ln2_gain, L.ln2_bias);
    }
    out.hidden = x;
    out.cls_embedding = take_position(tape, x, 0);
    out.logits = linear(tape, out.cls_embedding, params.decoder_weight, params.decoder_bias);
    return out;
}

Label classify(std::span<const double> logits) {
    if (logits.size() != 2) throw Error(ErrorKind::Shape, "classify expects two logits");
    if (std::isnan(logits[0]) || std::isnan(logits[1])) throw Error(ErrorKind::Numeric, "NaN logit");
    return logits[1] > logits[0] ? Label::Sarcasm : Label::NotSarcasm;
}

}  // namespace sarc
