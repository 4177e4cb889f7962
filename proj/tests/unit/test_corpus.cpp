#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>
#include <set>

#include "sarc/corpus.hpp"
#include "sarc/error.hpp"
#include "sarc/tokenizer.hpp"

using namespace sarc;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return fs::path(std::getenv("SARC_FIXTURES")) / name; }

fs::path write_temp(const std::string& name, const std::string& text) {
    auto path = fs::temp_directory_path() / ("sarc_test_" + name);
    std::ofstream(path) << text;
    return path;
}

ConversationThread thread(std::string id, std::string response, std::vector<std::string> context,
                          std::optional<Label> label) {
    return {std::move(id), std::move(context), std::move(response), label};
}

Corpus numbered(std::size_t n) {
    Corpus c;
    for (std::size_t i = 0; i < n; ++i)
        c.records.push_back(thread("r" + std::to_string(i), "text " + std::to_string(i), {}, Label::Sarcasm));
    return c;
}

}  // namespace

TEST_CASE("load_jsonl: empty file gives an empty corpus") {
    auto c = load_jsonl(write_temp("empty.jsonl", ""), Source::Twitter);
    CHECK(c.empty());
}

TEST_CASE("load_jsonl: three-line fixture, field by field") {
    auto c = load_jsonl(fixture("twitter_three.jsonl"), Source::Twitter);
    REQUIRE(c.size() == 3);
    CHECK(c.records[0].id == "twitter_1");
    CHECK(c.records[1].id == "twitter_2");
    CHECK(c.records[2].id == "twitter_3");
    CHECK(c.records[0].label == Label::Sarcasm);
    CHECK(c.records[1].label == Label::NotSarcasm);
    CHECK(c.records[0].context.size() == 2);
    CHECK(c.records[0].context[1] == "@USER it is what's going round in the heads of many I know ...");
    CHECK(c.records[1].response == "@USER thanks , see you there");
    CHECK(c.records[1].context == std::vector<std::string>{"meeting moved to friday"});
    CHECK(c.records[2].context.empty());
    CHECK(infer_source(fixture("twitter_three.jsonl")) == Source::Twitter);
}

TEST_CASE("load_jsonl: schema errors name the line") {
    auto expect_schema = [](const std::string& text, const std::string& needle) {
        try {
            load_jsonl(write_temp("bad.jsonl", text), Source::Reddit);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Schema);
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_schema("{\"response\": 5}\n", "line 1: type error");
    expect_schema("{\"response\": \"ok\", \"context\": []}\n{oops\n", "line 2: malformed JSON");
    expect_schema("{\"context\": []}\n", "missing field 'response'");
    expect_schema("{\"response\": \"x\", \"label\": \"MAYBE\"}\n", "unknown label");
    expect_schema("{\"response\": \"   \"}\n", "empty");
    expect_schema("{\"id\": \"a\", \"response\": \"x\"}\n{\"id\": \"a\", \"response\": \"y\"}\n", "duplicate id");
}

TEST_CASE("load_jsonl: missing file") {
    CHECK_THROWS_AS(load_jsonl("/nonexistent/file.jsonl", Source::Mixed), Error);
}

TEST_CASE("save_jsonl round-trips through load_jsonl") {
    auto c = load_jsonl(fixture("twitter_three.jsonl"), Source::Twitter);
    auto path = fs::temp_directory_path() / "sarc_test_roundtrip.jsonl";
    save_jsonl(c, path);
    CHECK(load_jsonl(path, Source::Twitter).records == c.records);
}

TEST_CASE("deduplicate") {
    SUBCASE("distinct records are untouched") {
        auto c = numbered(5);
        auto d = deduplicate(c);
        CHECK(d.removed == 0);
        CHECK(d.corpus.records == c.records);
    }
    SUBCASE("N identical records collapse to the first") {
        Corpus c;
        for (int i = 0; i < 4; ++i) c.records.push_back(thread("x" + std::to_string(i), "same", {"ctx"}, Label::Sarcasm));
        auto d = deduplicate(c);
        CHECK(d.corpus.size() == 1);
        CHECK(d.corpus.records[0].id == "x0");
        CHECK(d.removed == 3);
    }
    SUBCASE("key is response, context and label after trailing-whitespace trim") {
        Corpus c;
        c.records.push_back(thread("a", "hello", {"one", "two"}, Label::Sarcasm));
        c.records.push_back(thread("b", "hello  ", {"one ", "two\t"}, Label::Sarcasm));   // duplicate
        c.records.push_back(thread("c", "hello", {"one", "two"}, Label::NotSarcasm));   // label differs
        c.records.push_back(thread("d", "hello", {"onetwo"}, Label::Sarcasm));          // context differs
        c.records.push_back(thread("e", " hello", {"one", "two"}, Label::Sarcasm));     // leading space kept
        auto d = deduplicate(c);
        CHECK(d.removed == 1);
        std::vector<std::string> ids;
        for (auto& t : d.corpus.records) ids.push_back(t.id);
        CHECK(ids == std::vector<std::string>{"a", "c", "d", "e"});
    }
    SUBCASE("5,000 records with 241 duplicates leave 4,759") {
        Corpus c;
        for (int i = 0; i < 4759; ++i) c.records.push_back(thread("t" + std::to_string(i), "tweet " + std::to_string(i), {}, Label::Sarcasm));
        for (int i = 0; i < 241; ++i) {
            auto dup = c.records[static_cast<std::size_t>(i * 7)];
            dup.id = "dup" + std::to_string(i);
            c.records.push_back(dup);
        }
        auto d = deduplicate(c);
        CHECK(d.corpus.size() == 4759);
        CHECK(d.removed == 241);
    }
    SUBCASE("idempotent") {
        auto c = generate_synthetic(200, 3);
        for (int i = 0; i < 30; ++i) {
            auto dup = c.records[static_cast<std::size_t>(i)];
            dup.id += "_dup";
            c.records.push_back(dup);
        }
        auto once = deduplicate(c).corpus;
        auto twice = deduplicate(once);
        CHECK(twice.removed == 0);
        CHECK(twice.corpus.records == once.records);
    }
}

TEST_CASE("split sizes follow round-half-up") {
    CHECK(dev_size(4759, 0.10) == 476);
    CHECK(dev_size(4400, 0.10) == 440);
    CHECK(dev_size(5, 0.10) == 1);   // 0.5 rounds up
    CHECK(dev_size(4, 0.10) == 0);
    CHECK_THROWS_AS(dev_size(10, 1.0), Error);

    auto c = numbered(4759);
    auto s = split(c, 0.10, 11);
    CHECK(s.dev.size() == 476);
    CHECK(s.train.size() == 4283);

    auto none = split(numbered(10), 0.0, 1);
    CHECK(none.dev.empty());
    CHECK(none.train.records == numbered(10).records);
}

TEST_CASE("split is a seed-deterministic partition that keeps corpus order") {
    auto c = numbered(300);
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        auto a = split(c, 0.2, seed);
        auto b = split(c, 0.2, seed);
        CHECK(a.dev.records == b.dev.records);
        std::set<std::string> ids;
        for (auto& t : a.train.records) ids.insert(t.id);
        for (auto& t : a.dev.records) ids.insert(t.id);
        CHECK(ids.size() == 300);
        CHECK(a.train.size() + a.dev.size() == 300);
        auto position = [](const std::string& id) { return std::stoi(id.substr(1)); };
        for (std::size_t i = 1; i < a.dev.size(); ++i)
            CHECK(position(a.dev.records[i - 1].id) < position(a.dev.records[i].id));
    }
    CHECK(split(c, 0.2, 1).dev.records != split(c, 0.2, 2).dev.records);
}

TEST_CASE("compute_stats") {
    SUBCASE("one-thread fixture by hand") {
        auto s = compute_stats(load_jsonl(fixture("one_thread.jsonl"), Source::Mixed));
        CHECK(s.nc == 1);
        CHECK(s.au_mean == 3.0);
        CHECK(s.au_std == 0.0);
        CHECK(s.at_mean == doctest::Approx(2.0));
        CHECK(s.at_std == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    }
    SUBCASE("constant token counts have zero spread") {
        Corpus c;
        c.records.push_back(thread("a", "w x y z", {"a b c d"}, Label::Sarcasm));
        c.records.push_back(thread("b", "  one two three four ", {}, Label::NotSarcasm));
        auto s = compute_stats(c);
        CHECK(s.at_mean == 4.0);
        CHECK(s.at_std == 0.0);
        CHECK(s.au_mean == 1.5);
        CHECK(s.au_std == 0.5);
    }
    SUBCASE("empty corpus is an error") { CHECK_THROWS_AS(compute_stats(Corpus{}), Error); }
}

TEST_CASE("generate_synthetic") {
    CHECK_THROWS_AS(generate_synthetic(0, 1), Error);
    CHECK_THROWS_AS(generate_synthetic(7, 1), Error);

    auto c = generate_synthetic(1000, 7);
    REQUIRE(c.size() == 1000);
    std::size_t sarcastic = 0;
    for (const auto& t : c.records) {
        sarcastic += t.label == Label::Sarcasm;
        std::size_t triggers = 0;
        for (const auto& u : t.context) {
            for (const auto& tok : normalize_and_split(u, {}))
                triggers += tok == kSyntheticTrigger;
        }
        CHECK(triggers == (t.label == Label::Sarcasm ? 1u : 0u));
        auto target = normalize_and_split(t.response, {});
        CHECK(std::find(target.begin(), target.end(), kSyntheticTrigger) == target.end());
    }
    CHECK(sarcastic == 500);

    auto again = generate_synthetic(1000, 7);
    CHECK(again.records == c.records);
    CHECK(generate_synthetic(1000, 8).records != c.records);
}

TEST_CASE("generate_synthetic: targets carry no label information") {
    // Exhaustive tally of (target token multiset, label) over a large draw.
    auto c = generate_synthetic(20000, 7);
    std::map<std::multiset<std::string>, std::pair<double, double>> table;  // (n_sarcasm, n_not)
    for (const auto& t : c.records) {
        auto toks = normalize_and_split(t.response, {});
        auto& cell = table[std::multiset<std::string>(toks.begin(), toks.end())];
        (t.label == Label::Sarcasm ? cell.first : cell.second) += 1.0;
    }
    CHECK(table.size() == synthetic_template_count());

    // Per template: label counts within 4 binomial standard deviations of balance.
    for (const auto& [key, cell] : table) {
        const double n = cell.first + cell.second;
        CHECK(std::abs(cell.first - n / 2.0) < 4.0 * std::sqrt(n / 4.0));
    }

    // Plug-in mutual information (bits). Under independence its bias is about
    // (templates - 1) / (2 n ln 2); require it to be of that order.
    const double total = static_cast<double>(c.size());
    double mi = 0.0;
    for (const auto& [key, cell] : table) {
        const double n = cell.first + cell.second;
        for (double joint : {cell.first, cell.second}) {
            if (joint == 0.0) continue;
            mi += joint / total * std::log2((joint / total) / ((n / total) * 0.5));
        }
    }
    const double bias = static_cast<double>(table.size() - 1) / (2.0 * total * std::log(2.0));
    CHECK(mi < 5.0 * bias);
}
