#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sarc/corpus.hpp"
#include "sarc/sequence.hpp"
#include "sarc/tensor.hpp"

namespace sarc {

/// Architecture hyperparameters. Defaults are desk-scale.
struct EncoderConfig {
    std::size_t num_layers = 2;
    std::size_t num_heads = 4;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t vocab_size = 0;
    std::size_t max_positions = 256;
    double dropout = 0.1;
    bool use_segment = true;

    std::size_t head_dim() const { return d_model / num_heads; }
    void validate() const;

    bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gain, ln1_bias;
    Tensor ff1_w, ff1_b, ff2_w, ff2_b;
    Tensor ln2_gain, ln2_bias;
};

struct EncoderParams {
    Tensor token_embedding;     // [vocab, d_model]
    Tensor position_embedding;  // [max_positions, d_model]
    Tensor segment_embedding;   // [2, d_model]
    std::vector<LayerParams> layers;
    Tensor decoder_weight;  // [d_model, 2]
    Tensor decoder_bias;    // [2]

    /// Weights ~ N(0, 0.02), biases and layer-norm shifts 0, layer-norm gains 1.
    static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);

    /// Every tensor with a stable dotted name, in a fixed order.
    std::vector<std::pair<std::string, Tensor>> named();
    std::vector<std::pair<std::string, Tensor>> named() const;

    EncoderParams clone() const;
    void zero_grad();
};

struct EncoderOutput {
    Tensor hidden;         // [b, L, d_model], final layer
    Tensor cls_embedding;  // [b, d_model]
    Tensor logits;         // [b, 2]
    std::vector<Tensor> attention;  // per layer, [b, heads, L, L]

    /// Attention weights of one head for one example as an L x L matrix.
    RowMatrix attention_matrix(std::size_t layer, std::size_t example, std::size_t head) const;
    std::span<const double> logits_of(std::size_t example) const;
};

/// Token + position (+ segment) embeddings, with dropout when rng is given.
Tensor embed(Tape& tape, const Batch& batch, const EncoderParams& params, const EncoderConfig& config,
             std::mt19937_64* dropout_rng = nullptr);

/// Post-norm transformer blocks, then the linear decoder applied to the
/// final CLS state. Dropout is active only when training (rng required).
EncoderOutput encoder_forward(Tape& tape, const Batch& batch, const EncoderParams& params,
                              const EncoderConfig& config, bool training, std::mt19937_64* dropout_rng = nullptr);

/// Argmax over [NOT_SARCASM, SARCASM]; an exact tie resolves to NOT_SARCASM.
Label classify(std::span<const double> logits);

/// Mask row-matrix of a batch as a float tensor [b, L].
Tensor mask_tensor(const Batch& batch);

}  // namespace sarc
