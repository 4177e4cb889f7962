#include "sarc/evalanalysis.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sarc/error.hpp"

namespace sarc {

using nlohmann::json;

ClassScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    ClassScores s;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

Metrics compute_metrics(std::span<const Label> preds, std::span<const Label> golds) {
    if (preds.size() != golds.size())
        throw Error(ErrorKind::InvalidArgument, "prediction/gold length mismatch (" + std::to_string(preds.size()) +
                                                    " vs " + std::to_string(golds.size()) + ")");
    if (preds.empty()) throw Error(ErrorKind::InvalidArgument, "cannot score zero predictions");

    Metrics m;
    auto& c = m.confusion;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == Label::Sarcasm;
        const bool g = golds[i] == Label::Sarcasm;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    m.sarcasm = scores_from_counts(c.tp, c.fp, c.fn);
    m.not_sarcasm = scores_from_counts(c.tn, c.fn, c.fp);
    m.macro = {(m.sarcasm.precision + m.not_sarcasm.precision) / 2.0,
               (m.sarcasm.recall + m.not_sarcasm.recall) / 2.0, (m.sarcasm.f1 + m.not_sarcasm.f1) / 2.0};
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(preds.size());
    return m;
}

namespace {

json to_json(const ClassScores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

}  // namespace

json to_json(const Metrics& m) {
    return {{"sarcasm", to_json(m.sarcasm)},
            {"not_sarcasm", to_json(m.not_sarcasm)},
            {"macro", to_json(m.macro)},
            {"accuracy", m.accuracy},
            {"confusion", {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"fn", m.confusion.fn}, {"tn", m.confusion.tn}}}};
}

BaselineDelta compare_to_baseline(double model_f1, double baseline_f1) {
    if (!(baseline_f1 >= 0.0 && baseline_f1 <= 1.0))
        throw Error(ErrorKind::InvalidArgument, "baseline F1 must lie in [0, 1]");
    return {model_f1, baseline_f1, (model_f1 - baseline_f1) * 100.0};
}

BaselineDelta compare_to_baseline(const Metrics& metrics, double baseline_f1) {
    return compare_to_baseline(metrics.macro.f1, baseline_f1);
}

std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::TwCc:
            return "TwCc";
        case ErrorCategory::TcCw:
            return "TcCw";
        case ErrorCategory::TwCw:
            return "TwCw";
        case ErrorCategory::TcCc:
            break;
    }
    return "TcCc";
}

ErrorCategory categorize(Label to_pred, Label ca_pred, Label gold) {
    const bool to_ok = to_pred == gold;
    const bool ca_ok = ca_pred == gold;
    if (!to_ok && ca_ok) return ErrorCategory::TwCc;
    if (to_ok && !ca_ok) return ErrorCategory::TcCw;
    if (!to_ok) return ErrorCategory::TwCw;
    return ErrorCategory::TcCc;
}

ErrorAnalysis categorize_errors(std::span<const Label> to_preds, std::span<const Label> ca_preds,
                                std::span<const Label> golds, std::span<const ConversationThread> threads) {
    const std::size_t n = golds.size();
    if (to_preds.size() != n || ca_preds.size() != n || threads.size() != n)
        throw Error(ErrorKind::InvalidArgument, "categorize_errors: input lengths differ");
    ErrorAnalysis a;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(categorize(to_preds[i], ca_preds[i], golds[i]));
        ++a.counts[c];
        a.examples[c].push_back(i);
    }
    return a;
}

json to_json(const ErrorAnalysis& analysis, std::span<const ConversationThread> threads) {
    json counts = json::object();
    json ids = json::object();
    std::size_t total = 0;
    for (auto c : kErrorCategories) {
        const std::string key(to_string(c));
        counts[key] = analysis.count(c);
        total += analysis.count(c);
        json list = json::array();
        for (auto i : analysis.members(c)) list.push_back(threads[i].id);
        ids[key] = std::move(list);
    }
    return {{"n", total}, {"counts", counts}, {"examples", ids}};
}

std::string render_error_examples(const ErrorAnalysis& analysis, std::span<const ConversationThread> threads,
                                  std::span<const Label> to_preds, std::span<const Label> ca_preds,
                                  std::size_t max_per_category) {
    std::ostringstream out;
    for (auto c : kErrorCategories) {
        const auto& members = analysis.members(c);
        out << "== " << to_string(c) << " (" << members.size() << ") ==\n";
        for (std::size_t k = 0; k < members.size() && k < max_per_category; ++k) {
            const auto i = members[k];
            const auto& t = threads[i];
            out << "-- " << t.id << "  gold=" << (t.label ? to_string(*t.label) : "?")
                << "  TO=" << to_string(to_preds[i]) << "  CA=" << to_string(ca_preds[i]) << '\n';
            for (std::size_t j = 0; j < t.context.size(); ++j) out << "C_" << j + 1 << " | " << t.context[j] << '\n';
            out << "T   | " << t.response << '\n';
        }
        out << '\n';
    }
    return out.str();
}

void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    for (const auto& [id, label] : predictions) out << id << ',' << to_string(label) << '\n';
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    std::vector<Prediction> out;
    std::size_t lineno = 0;
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos || comma == 0)
            throw Error(ErrorKind::Schema, path.string() + " line " + std::to_string(lineno) + ": expected <id>,<LABEL>");
        try {
            out.emplace_back(line.substr(0, comma), parse_label(std::string_view(line).substr(comma + 1)));
        } catch (const Error& e) {
            throw Error(ErrorKind::Schema, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Label> align_predictions(std::span<const Prediction> predictions, const Corpus& corpus) {
    std::unordered_map<std::string, Label> by_id;
    for (const auto& [id, label] : predictions) {
        if (!by_id.emplace(id, label).second) throw Error(ErrorKind::Schema, "duplicate prediction for '" + id + "'");
    }
    std::vector<Label> out;
    out.reserve(corpus.size());
    for (const auto& t : corpus.records) {
        auto it = by_id.find(t.id);
        if (it == by_id.end()) throw Error(ErrorKind::Schema, "no prediction for '" + t.id + "'");
        out.push_back(it->second);
    }
    return out;
}

}  // namespace sarc
