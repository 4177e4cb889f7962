#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sarc/corpus.hpp"
#include "sarc/encoder.hpp"
#include "sarc/evalanalysis.hpp"
#include "sarc/sequence.hpp"
#include "sarc/tokenizer.hpp"

namespace sarc {

/// Fine-tuning protocol for full-size encoders; epochs and seeds are also the desk defaults.
inline constexpr double kFineTuneLearningRate = 3e-5;
inline constexpr std::size_t kDefaultEpochs = 30;
inline constexpr std::array<std::uint64_t, 3> kDefaultSeeds = {21, 42, 63};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

/// One bias-corrected Adam update of param in place.
void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double learning_rate,
               const AdamConfig& config = {});

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

struct TrainConfig {
    double learning_rate = 1e-3;  // desk scale; kFineTuneLearningRate for full-size encoders
    std::size_t epochs = kDefaultEpochs;
    std::size_t batch_size = 16;
    std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
    AdamConfig adam;
    double grad_clip_norm = 1.0;  // <= 0 disables clipping
    std::size_t eval_batch_size = 64;
    SequenceConfig sequence;
    TokenizerConfig tokenizer;
    std::filesystem::path checkpoint_dir;  // empty: keep best weights in memory only
    std::size_t max_parallel_runs = 0;     // 0: hardware concurrency

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    Metrics dev;
};

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    Metrics best;
    EncoderParams best_params;
    EncoderConfig encoder;
    std::filesystem::path checkpoint_path;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

/// Mean and std in the "81.3 (±0.2)" layout; values are taken as given.
std::string format_mean_std(const MeanStd& value, int decimals = 1);

struct AggregateResult {
    std::map<std::string, MeanStd> metrics;  // precision, recall, f1_macro, f1_sarcasm, accuracy
    std::size_t runs = 0;
};

AggregateResult aggregate(std::span<const RunResult> runs);

struct MultiRunResult {
    std::vector<RunResult> runs;  // in seed order
    AggregateResult aggregate;
};

/// Tokenized model inputs for every record of a corpus.
std::vector<ModelInput> build_inputs(const Corpus& corpus, const Vocabulary& vocab, const TokenizerConfig& tok,
                                     const SequenceConfig& seq);

/// Gold labels as 0/1; throws when a record is unlabeled.
std::vector<int> label_ids(const Corpus& corpus);

/// Eval-mode logits, computed in batches.
std::vector<std::array<double, 2>> predict_logits(const EncoderParams& params, const EncoderConfig& config,
                                                  std::span<const ModelInput> inputs, std::size_t batch_size = 64);
std::vector<Label> predict_labels(const EncoderParams& params, const EncoderConfig& config,
                                  std::span<const ModelInput> inputs, std::size_t batch_size = 64);

/// Encoder config with vocab_size and max_positions fitted to the run.
EncoderConfig resolve_encoder_config(EncoderConfig config, const Vocabulary& vocab, const SequenceConfig& seq);

/// Seeded training with per-epoch dev evaluation; keeps the epoch with the
/// best dev macro F1 (earliest on ties).
RunResult train_run(const Corpus& train, const Corpus& dev, const Vocabulary& vocab, const EncoderConfig& encoder,
                    const TrainConfig& config, std::uint64_t seed);

/// One train_run per configured seed, possibly in parallel.
MultiRunResult multi_run(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                         const EncoderConfig& encoder, const TrainConfig& config);

/// `{seed, epoch, split, precision, recall, f1_macro, f1_sarcasm}` per line.
std::string metrics_jsonl(std::span<const RunResult> runs);

nlohmann::json to_json(const AggregateResult& aggregate);

}  // namespace sarc
