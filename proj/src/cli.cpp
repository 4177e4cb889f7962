#include "sarc/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarc/checkpoint.hpp"
#include "sarc/corpus.hpp"
#include "sarc/digest.hpp"
#include "sarc/error.hpp"
#include "sarc/evalanalysis.hpp"
#include "sarc/train.hpp"

namespace sarc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string out;
};

struct DataOptions {
    std::string data;
    std::string data2;
};

struct TrainOptions {
    DataOptions data;
    std::string dev;
    std::string vocab;
    std::string mode = "context";
    std::size_t max_len_target = kDefaultMaxLenTarget;
    std::size_t max_len_context = kDefaultMaxLenContext;
    std::string truncate = "tail";
    std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
    double lr = 1e-3;
    std::size_t epochs = kDefaultEpochs;
    std::size_t batch_size = 16;
    double dev_fraction = 0.10;
    std::uint64_t split_seed = 0;
    bool no_dedup = false;
    double grad_clip = 1.0;
    std::size_t parallel = 0;
    TokenizerConfig tokenizer;
    bool no_lowercase = false;
    EncoderConfig encoder;
    bool no_segment = false;
};

fs::path output_dir(const std::string& flag, const std::string& subcommand) {
    if (!flag.empty()) return flag;
    const char* root = std::getenv("SARC_OUT_ROOT");
    return fs::path(root && *root ? root : "runs") / subcommand;
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw Error(ErrorKind::MissingFile, "no such file: " + path);
}

Corpus load(const std::string& path) {
    require_file(path);
    return load_jsonl(path, infer_source(path));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    out << text;
}

// Records what ran, with which resolved options, on which input bytes.
class Manifest {
   public:
    Manifest(std::string command, const std::vector<std::string>& args) {
        doc_["command"] = std::move(command);
        doc_["argv"] = args;
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
    }
    void input(const std::string& role, const std::string& path) {
        if (path.empty()) return;
        doc_["inputs"].push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
    }
    void output(const std::string& name) { doc_["outputs"].push_back(name); }
    json& operator[](const char* key) { return doc_[key]; }
    // Also writes config.toml, so `sarc --config <dir>/config.toml <command>` reruns.
    void write(const fs::path& dir, const CLI::App& app, const std::string& subcommand) {
        std::istringstream all(app.config_to_str(true, false));
        std::string own;
        for (std::string line; std::getline(all, line);) {
            if (line.rfind(subcommand + ".", 0) == 0) own += line + "\n";
        }
        write_text(dir / "config.toml", own);
        doc_["resolved_config"] = own;
        doc_["outputs"].push_back("config.toml");
        write_text(dir / "manifest.json", doc_.dump(2) + "\n");
    }

   private:
    json doc_;
};

std::vector<std::string> corpus_texts(const Corpus& corpus) {
    std::vector<std::string> texts;
    for (const auto& t : corpus.records) {
        texts.push_back(t.response);
        texts.insert(texts.end(), t.context.begin(), t.context.end());
    }
    return texts;
}

json stats_json(const CorpusStats& s) {
    return {{"nc", s.nc}, {"au_mean", s.au_mean}, {"au_std", s.au_std}, {"at_mean", s.at_mean}, {"at_std", s.at_std}};
}

void add_data_options(CLI::App* sub, DataOptions& d, bool second) {
    sub->add_option("--data", d.data, "JSON-lines conversation file")->required();
    if (second) sub->add_option("--data2", d.data2, "second dataset, combined with --data");
}

void add_tokenizer_options(CLI::App* sub, TokenizerConfig& tok, bool& no_lowercase) {
    sub->add_option("--min-freq", tok.min_freq, "minimum token frequency")->capture_default_str();
    sub->add_option("--max-vocab", tok.max_vocab, "vocabulary cap including reserved ids")->capture_default_str();
    sub->add_flag("--no-lowercase", no_lowercase, "keep case");
}

void check_mode(const std::string& requested, const Checkpoint& ck) {
    if (requested.empty()) return;
    if (parse_mode(requested) != ck.sequence.mode)
        throw Error(ErrorKind::MixedMode, "--mode " + requested + " does not match the checkpoint's " +
                                              std::string(to_string(ck.sequence.mode)) + " mode");
}

std::vector<Label> predict_corpus(const Checkpoint& ck, const Corpus& corpus) {
    const auto inputs = build_inputs(corpus, ck.vocab, ck.tokenizer, ck.sequence);
    return predict_labels(ck.params, ck.encoder, inputs);
}

int report(std::ostream& err, ErrorKind kind, const std::string& what) {
    err << "sarc: error: " << what << '\n';
    switch (kind) {
        case ErrorKind::MissingFile:
            return kMissingFile;
        case ErrorKind::Schema:
            return kSchema;
        case ErrorKind::MixedMode:
            return kMixedMode;
        case ErrorKind::InvalidArgument:
            return kInvalidArgument;
        case ErrorKind::Shape:
        case ErrorKind::Numeric:
            break;
    }
    return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Target-oriented and context-aware transformer sarcasm detection"};
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
    app.require_subcommand(1);

    Common common;
    auto add_out = [&common](CLI::App* sub) { sub->add_option("--out", common.out, "output directory"); };

    // stats
    DataOptions stats_data;
    auto* stats = app.add_subcommand("stats", "corpus statistics (conversations, utterances, tokens)");
    add_data_options(stats, stats_data, false);
    add_out(stats);

    // build-vocab
    DataOptions vocab_data;
    TokenizerConfig vocab_tok;
    bool vocab_no_lower = false;
    auto* build_vocab = app.add_subcommand("build-vocab", "build a vocabulary file from training text");
    add_data_options(build_vocab, vocab_data, true);
    add_tokenizer_options(build_vocab, vocab_tok, vocab_no_lower);
    add_out(build_vocab);

    // train
    TrainOptions t;
    auto* train = app.add_subcommand("train", "seeded training runs with dev selection and aggregation");
    add_data_options(train, t.data, true);
    train->add_option("--dev", t.dev, "explicit labeled dev file (skips the random split)");
    train->add_option("--vocab", t.vocab, "existing vocabulary file");
    train->add_option("--mode", t.mode, "target | context")->check(CLI::IsMember({"target", "context"}))->capture_default_str();
    train->add_option("--max-len-target", t.max_len_target)->capture_default_str();
    train->add_option("--max-len-context", t.max_len_context)->capture_default_str();
    train->add_option("--truncate", t.truncate, "context side cut on overflow")
        ->check(CLI::IsMember({"tail", "head"}))
        ->capture_default_str();
    train->add_option("--seeds", t.seeds, "comma-separated run seeds")->delimiter(',')->capture_default_str();
    train->add_option("--lr", t.lr, "learning rate")->capture_default_str();
    train->add_option("--epochs", t.epochs)->capture_default_str();
    train->add_option("--batch-size", t.batch_size)->capture_default_str();
    train->add_option("--dev-fraction", t.dev_fraction)->capture_default_str();
    train->add_option("--split-seed", t.split_seed)->capture_default_str();
    train->add_flag("--no-dedup", t.no_dedup, "keep exact duplicates");
    train->add_option("--grad-clip", t.grad_clip, "global gradient norm cap (<= 0 disables)")->capture_default_str();
    train->add_option("--parallel", t.parallel, "concurrent seed runs (0 = hardware threads)")->capture_default_str();
    add_tokenizer_options(train, t.tokenizer, t.no_lowercase);
    train->add_option("--layers", t.encoder.num_layers)->capture_default_str();
    train->add_option("--heads", t.encoder.num_heads)->capture_default_str();
    train->add_option("--d-model", t.encoder.d_model)->capture_default_str();
    train->add_option("--d-ff", t.encoder.d_ff)->capture_default_str();
    train->add_option("--max-positions", t.encoder.max_positions)->capture_default_str();
    train->add_option("--dropout", t.encoder.dropout)->capture_default_str();
    train->add_flag("--no-segment", t.no_segment, "disable segment embeddings");
    add_out(train);

    // evaluate
    std::string eval_ckpt, eval_data, eval_mode;
    auto* evaluate = app.add_subcommand("evaluate", "metrics of a checkpoint on a labeled file");
    evaluate->add_option("--checkpoint", eval_ckpt)->required();
    evaluate->add_option("--data", eval_data)->required();
    evaluate->add_option("--mode", eval_mode, "assert the checkpoint's input mode");
    add_out(evaluate);

    // predict
    std::string pred_ckpt, pred_data, pred_mode;
    auto* predict = app.add_subcommand("predict", "write <id>,<LABEL> predictions");
    predict->add_option("--checkpoint", pred_ckpt)->required();
    predict->add_option("--data", pred_data)->required();
    predict->add_option("--mode", pred_mode, "assert the checkpoint's input mode");
    add_out(predict);

    // analyze
    std::string an_to, an_ca, an_data;
    std::size_t an_max_examples = 10;
    auto* analyze = app.add_subcommand("analyze", "TwCc/TcCw/TwCw/TcCc breakdown of two prediction files");
    analyze->add_option("--to-preds", an_to, "target-oriented predictions")->required();
    analyze->add_option("--ca-preds", an_ca, "context-aware predictions")->required();
    analyze->add_option("--data", an_data, "gold-labeled threads")->required();
    analyze->add_option("--max-examples", an_max_examples, "examples dumped per category")->capture_default_str();
    add_out(analyze);

    // synth-data
    std::size_t syn_n = 2000;
    std::uint64_t syn_seed = 7;
    auto* synth = app.add_subcommand("synth-data", "generate the context-dependent synthetic corpus");
    synth->add_option("--n", syn_n, "number of threads (even)")->capture_default_str();
    synth->add_option("--seed", syn_seed)->capture_default_str();
    add_out(synth);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "sarc: error: " << e.what() << '\n';
        return kUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string name = active->get_name();

    try {
        const fs::path dir = output_dir(common.out, name);
        fs::create_directories(dir);
        Manifest manifest(name, args);

        if (active == stats) {
            manifest.input("data", stats_data.data);
            const auto s = stats_json(compute_stats(load(stats_data.data)));
            write_text(dir / "stats.json", s.dump(2) + "\n");
            manifest.output("stats.json");
            out << s.dump() << '\n';
        } else if (active == build_vocab) {
            vocab_tok.lowercase = !vocab_no_lower;
            manifest.input("data", vocab_data.data);
            manifest.input("data2", vocab_data.data2);
            Corpus corpus = load(vocab_data.data);
            if (!vocab_data.data2.empty()) corpus = combine(corpus, load(vocab_data.data2));
            const auto vocab = train_vocab(corpus_texts(corpus), vocab_tok);
            vocab.save(dir / "vocab.txt");
            manifest.output("vocab.txt");
            manifest["tokenizer"] = to_json(vocab_tok);
            out << "vocabulary of " << vocab.size() << " entries -> " << (dir / "vocab.txt").string() << '\n';
        } else if (active == train) {
            t.tokenizer.lowercase = !t.no_lowercase;
            t.encoder.use_segment = !t.no_segment;
            manifest.input("data", t.data.data);
            manifest.input("data2", t.data.data2);
            manifest.input("dev", t.dev);
            manifest.input("vocab", t.vocab);

            // Each dataset is deduplicated and split on its own, then the halves are pooled.
            Corpus train_set, dev_set;
            json prep = json::array();
            bool first = true;
            for (const auto& path : {t.data.data, t.data.data2}) {
                if (path.empty()) continue;
                Corpus c = load(path);
                std::size_t removed = 0;
                if (!t.no_dedup) {
                    auto d = deduplicate(c);
                    removed = d.removed;
                    c = std::move(d.corpus);
                }
                Split s = t.dev.empty() ? split(c, t.dev_fraction, t.split_seed) : Split{c, Corpus{}};
                prep.push_back({{"path", path},
                                {"records", c.size() + removed},
                                {"duplicates_removed", removed},
                                {"train", s.train.size()},
                                {"dev", s.dev.size()}});
                train_set = first ? s.train : combine(train_set, s.train);
                dev_set = first ? s.dev : combine(dev_set, s.dev);
                first = false;
            }
            if (!t.dev.empty()) dev_set = load(t.dev);
            manifest["data_preparation"] = prep;

            TrainConfig config;
            config.learning_rate = t.lr;
            config.epochs = t.epochs;
            config.batch_size = t.batch_size;
            config.seeds = t.seeds;
            config.grad_clip_norm = t.grad_clip;
            config.max_parallel_runs = t.parallel;
            config.tokenizer = t.tokenizer;
            config.sequence.mode = parse_mode(t.mode);
            config.sequence.max_len_target = t.max_len_target;
            config.sequence.max_len_context = t.max_len_context;
            config.sequence.truncation = t.truncate == "head" ? ContextTruncation::Head : ContextTruncation::Tail;
            config.checkpoint_dir = dir / "checkpoints";

            const Vocabulary vocab = t.vocab.empty() ? train_vocab(corpus_texts(train_set), config.tokenizer)
                                                     : (require_file(t.vocab), Vocabulary::load(t.vocab));
            vocab.save(dir / "vocab.txt");

            auto result = multi_run(train_set, dev_set, vocab, t.encoder, config);
            write_text(dir / "metrics.jsonl", metrics_jsonl(result.runs));
            json agg = to_json(result.aggregate);
            json runs = json::array();
            for (const auto& r : result.runs) {
                runs.push_back({{"seed", r.seed},
                                {"best_epoch", r.best_epoch},
                                {"best", to_json(r.best)},
                                {"checkpoint", fs::relative(r.checkpoint_path, dir).string()}});
            }
            agg["per_run"] = runs;
            write_text(dir / "aggregate.json", agg.dump(2) + "\n");
            for (const auto& f : {"vocab.txt", "metrics.jsonl", "aggregate.json", "checkpoints/"}) manifest.output(f);
            manifest["seeds"] = t.seeds;
            manifest["encoder"] = to_json(resolve_encoder_config(t.encoder, vocab, config.sequence));
            manifest["sequence"] = to_json(config.sequence);
            manifest["tokenizer"] = to_json(config.tokenizer);

            const auto& m = result.aggregate.metrics;
            auto pct = [&m](const char* key) {
                const auto& v = m.at(key);
                return format_mean_std({v.mean * 100.0, v.std * 100.0});
            };
            out << to_string(config.sequence.mode) << " model, " << result.runs.size() << " runs: P " << pct("precision")
                << "  R " << pct("recall") << "  F1 " << pct("f1_macro") << "  Acc " << pct("accuracy") << '\n';
        } else if (active == evaluate) {
            manifest.input("checkpoint", eval_ckpt);
            manifest.input("data", eval_data);
            require_file(eval_ckpt);
            const Checkpoint ck = load_checkpoint(eval_ckpt);
            check_mode(eval_mode, ck);
            const Corpus corpus = load(eval_data);
            std::vector<Label> gold;
            for (int y : label_ids(corpus)) gold.push_back(static_cast<Label>(y));
            const json m = to_json(compute_metrics(predict_corpus(ck, corpus), gold));
            write_text(dir / "metrics.json", m.dump(2) + "\n");
            manifest.output("metrics.json");
            out << m.dump() << '\n';
        } else if (active == predict) {
            manifest.input("checkpoint", pred_ckpt);
            manifest.input("data", pred_data);
            require_file(pred_ckpt);
            const Checkpoint ck = load_checkpoint(pred_ckpt);
            check_mode(pred_mode, ck);
            const Corpus corpus = load(pred_data);
            const auto labels = predict_corpus(ck, corpus);
            std::vector<Prediction> preds;
            for (std::size_t i = 0; i < labels.size(); ++i) preds.emplace_back(corpus.records[i].id, labels[i]);
            write_predictions(preds, dir / "predictions.txt");
            manifest.output("predictions.txt");
            out << preds.size() << " predictions -> " << (dir / "predictions.txt").string() << '\n';
        } else if (active == analyze) {
            manifest.input("to_preds", an_to);
            manifest.input("ca_preds", an_ca);
            manifest.input("data", an_data);
            require_file(an_to);
            require_file(an_ca);
            const Corpus corpus = load(an_data);
            std::vector<Label> gold;
            for (int y : label_ids(corpus)) gold.push_back(static_cast<Label>(y));
            const auto to_preds = align_predictions(read_predictions(an_to), corpus);
            const auto ca_preds = align_predictions(read_predictions(an_ca), corpus);
            const auto analysis = categorize_errors(to_preds, ca_preds, gold, corpus.records);
            json report = to_json(analysis, corpus.records);
            report["target_oriented"] = to_json(compute_metrics(to_preds, gold));
            report["context_aware"] = to_json(compute_metrics(ca_preds, gold));
            write_text(dir / "analysis.json", report.dump(2) + "\n");
            write_text(dir / "examples.txt",
                       render_error_examples(analysis, corpus.records, to_preds, ca_preds, an_max_examples));
            manifest.output("analysis.json");
            manifest.output("examples.txt");
            out << report["counts"].dump() << '\n';
        } else if (active == synth) {
            const Corpus corpus = generate_synthetic(syn_n, syn_seed);
            save_jsonl(corpus, dir / "synthetic.jsonl");
            manifest.output("synthetic.jsonl");
            out << corpus.size() << " threads -> " << (dir / "synthetic.jsonl").string() << '\n';
        }
        manifest.write(dir, app, name);
    } catch (const Error& e) {
        return report(err, e.kind(), e.what());
    } catch (const std::exception& e) {
        err << "sarc: error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}

}  // namespace sarc::cli
