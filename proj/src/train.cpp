#include "sarc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

#include "sarc/checkpoint.hpp"
#include "sarc/error.hpp"

namespace sarc {

using nlohmann::json;

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state, double learning_rate,
               const AdamConfig& config) {
    const std::size_t n = param.size();
    if (grad.size() != n) throw Error(ErrorKind::Shape, "adam_step: gradient size does not match parameter");
    for (double g : grad) {
        if (!std::isfinite(g)) throw Error(ErrorKind::Numeric, "adam_step: non-finite gradient");
    }
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
    auto values = param.values();
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        values[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (double& g : p.grad_buffer()) g *= factor;
        }
    }
    return norm;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
    if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1 || eval_batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
    if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "at least one seed is required");
    tokenizer.validate();
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

std::string format_mean_std(const MeanStd& value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f (±%.*f)", decimals, value.mean, decimals, value.std);
    return buf;
}

AggregateResult aggregate(std::span<const RunResult> runs) {
    AggregateResult out;
    out.runs = runs.size();
    std::map<std::string, std::vector<double>> columns;
    for (const auto& r : runs) {
        columns["precision"].push_back(r.best.macro.precision);
        columns["recall"].push_back(r.best.macro.recall);
        columns["f1_macro"].push_back(r.best.macro.f1);
        columns["f1_sarcasm"].push_back(r.best.sarcasm.f1);
        columns["accuracy"].push_back(r.best.accuracy);
    }
    for (const auto& [name, values] : columns) out.metrics[name] = mean_std(values);
    return out;
}

std::vector<ModelInput> build_inputs(const Corpus& corpus, const Vocabulary& vocab, const TokenizerConfig& tok,
                                     const SequenceConfig& seq) {
    std::vector<ModelInput> out;
    out.reserve(corpus.size());
    for (const auto& t : corpus.records) out.push_back(build_input(t, vocab, tok, seq));
    return out;
}

std::vector<int> label_ids(const Corpus& corpus) {
    std::vector<int> out;
    out.reserve(corpus.size());
    for (const auto& t : corpus.records) {
        if (!t.label) throw Error(ErrorKind::Schema, "record '" + t.id + "' has no label");
        out.push_back(static_cast<int>(*t.label));
    }
    return out;
}

std::vector<std::array<double, 2>> predict_logits(const EncoderParams& params, const EncoderConfig& config,
                                                  std::span<const ModelInput> inputs, std::size_t batch_size) {
    std::vector<std::array<double, 2>> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
        const auto chunk = inputs.subspan(start, std::min(batch_size, inputs.size() - start));
        Tape tape;
        auto result = encoder_forward(tape, pad_batch(chunk), params, config, false);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            auto l = result.logits_of(i);
            out.push_back({l[0], l[1]});
        }
    }
    return out;
}

std::vector<Label> predict_labels(const EncoderParams& params, const EncoderConfig& config,
                                  std::span<const ModelInput> inputs, std::size_t batch_size) {
    std::vector<Label> out;
    out.reserve(inputs.size());
    for (const auto& l : predict_logits(params, config, inputs, batch_size)) out.push_back(classify(l));
    return out;
}

EncoderConfig resolve_encoder_config(EncoderConfig config, const Vocabulary& vocab, const SequenceConfig& seq) {
    config.vocab_size = vocab.size();
    if (config.max_positions < seq.max_len())
        throw Error(ErrorKind::InvalidArgument, "max_positions " + std::to_string(config.max_positions) +
                                                    " is shorter than the configured input length " +
                                                    std::to_string(seq.max_len()));
    config.validate();
    return config;
}

namespace {

std::vector<Label> to_labels(std::span<const int> ids) {
    std::vector<Label> out;
    out.reserve(ids.size());
    for (int y : ids) out.push_back(static_cast<Label>(y));
    return out;
}

}  // namespace

RunResult train_run(const Corpus& train, const Corpus& dev, const Vocabulary& vocab, const EncoderConfig& encoder,
                    const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    if (train.empty() || dev.empty()) throw Error(ErrorKind::InvalidArgument, "train and dev corpora must be non-empty");
    const EncoderConfig enc = resolve_encoder_config(encoder, vocab, config.sequence);

    const auto train_inputs = build_inputs(train, vocab, config.tokenizer, config.sequence);
    const auto train_labels = label_ids(train);
    const auto dev_inputs = build_inputs(dev, vocab, config.tokenizer, config.sequence);
    const auto dev_gold = to_labels(label_ids(dev));

    RunResult result;
    result.seed = seed;
    result.encoder = enc;

    EncoderParams params = EncoderParams::init(enc, seed);
    auto named = params.named();
    std::vector<Tensor> tensors;
    for (auto& [name, t] : named) tensors.push_back(t);
    std::vector<AdamState> adam(tensors.size());

    // Separate streams so shuffling does not depend on how much dropout consumed.
    std::seed_seq shuffle_seq{seed, std::uint64_t{1}};
    std::seed_seq dropout_seq{seed, std::uint64_t{2}};
    std::mt19937_64 shuffle_rng(shuffle_seq);
    std::mt19937_64 dropout_rng(dropout_seq);

    std::vector<std::size_t> order(train_inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<ModelInput> batch_inputs;
    std::vector<int> batch_labels;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch_inputs.clear();
            batch_labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch_inputs.push_back(train_inputs[order[k]]);
                batch_labels.push_back(train_labels[order[k]]);
            }
            Batch batch = pad_batch(batch_inputs);

            params.zero_grad();
            Tape tape;
            auto out = encoder_forward(tape, batch, params, enc, true, &dropout_rng);
            Tensor loss = cross_entropy(tape, out.logits, batch_labels);
            backward(tape, loss);
            clip_grad_norm(tensors, config.grad_clip_norm);
            for (std::size_t i = 0; i < tensors.size(); ++i) {
                adam_step(tensors[i], tensors[i].grad_buffer(), adam[i], config.learning_rate, config.adam);
            }
            loss_sum += loss.item();
            ++batches;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(batches);
        record.dev = compute_metrics(predict_labels(params, enc, dev_inputs, config.eval_batch_size), dev_gold);
        if (result.best_epoch == 0 || record.dev.macro.f1 > result.best.macro.f1) {
            result.best_epoch = epoch;
            result.best = record.dev;
            result.best_params = params.clone();
        }
        result.epochs.push_back(record);
    }

    if (!config.checkpoint_dir.empty()) {
        std::filesystem::create_directories(config.checkpoint_dir);
        result.checkpoint_path = config.checkpoint_dir / ("seed_" + std::to_string(seed) + ".ckpt");
        Checkpoint ck{enc, config.sequence, config.tokenizer, vocab, seed, result.best_epoch, result.best_params};
        save_checkpoint(ck, result.checkpoint_path);
    }
    return result;
}

MultiRunResult multi_run(const Corpus& train, const Corpus& dev, const Vocabulary& vocab,
                         const EncoderConfig& encoder, const TrainConfig& config) {
    config.validate();
    const std::size_t n = config.seeds.size();
    std::size_t workers = config.max_parallel_runs ? config.max_parallel_runs : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, n);

    MultiRunResult out;
    out.runs.resize(n);
    std::vector<std::exception_ptr> errors(n);
    for (std::size_t first = 0; first < n; first += workers) {
        std::vector<std::jthread> pool;
        for (std::size_t i = first; i < std::min(n, first + workers); ++i) {
            pool.emplace_back([&, i] {
                try {
                    out.runs[i] = train_run(train, dev, vocab, encoder, config, config.seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    out.aggregate = aggregate(out.runs);
    return out;
}

std::string metrics_jsonl(std::span<const RunResult> runs) {
    std::string out;
    for (const auto& r : runs) {
        for (const auto& e : r.epochs) {
            json line = {{"seed", r.seed},
                         {"epoch", e.epoch},
                         {"split", "dev"},
                         {"precision", e.dev.macro.precision},
                         {"recall", e.dev.macro.recall},
                         {"f1_macro", e.dev.macro.f1},
                         {"f1_sarcasm", e.dev.sarcasm.f1}};
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

json to_json(const AggregateResult& aggregate) {
    json metrics = json::object();
    for (const auto& [name, ms] : aggregate.metrics) {
        metrics[name] = {{"mean", ms.mean}, {"std", ms.std}, {"report", format_mean_std({ms.mean * 100, ms.std * 100})}};
    }
    return {{"runs", aggregate.runs}, {"metrics", metrics}};
}

}  // namespace sarc
