#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sarc/error.hpp"
#include "sarc/sequence.hpp"

using namespace sarc;
using Ids = std::vector<int>;

namespace {

Ids range_ids(int first, std::size_t n) {
    Ids out(n);
    std::iota(out.begin(), out.end(), first);
    return out;
}

std::size_t count_of(const Ids& ids, int id) { return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id)); }

void check_well_formed(const ModelInput& in, std::size_t max_len) {
    REQUIRE(in.size() >= 1);
    CHECK(in.ids[0] == kClsId);
    CHECK(in.size() <= max_len);
    CHECK(in.mask.size() == in.size());
    CHECK(in.segment.size() == in.size());
    CHECK(count_of(in.ids, kSepId) == (in.mode == InputMode::ContextAware ? 1u : 0u));
}

}  // namespace

TEST_CASE("build_target_input examples") {
    auto five = build_target_input(range_ids(10, 5));
    CHECK(five.size() == 6);
    CHECK(five.ids == Ids{kClsId, 10, 11, 12, 13, 14});
    CHECK(five.mode == InputMode::TargetOriented);
    CHECK(five.segment == Ids(6, 0));
    CHECK(five.mask == Ids(6, 1));

    CHECK(build_target_input(Ids{}).ids == Ids{kClsId});

    auto long_target = range_ids(10, 200);
    auto cut = build_target_input(long_target, 128);
    CHECK(cut.size() == 128);
    CHECK(std::equal(cut.ids.begin() + 1, cut.ids.end(), long_target.begin()));
}

TEST_CASE("build_context_input examples") {
    std::vector<Ids> ctx{{20, 21}, {22, 23}};
    auto in = build_context_input(Ids{10, 11, 12}, ctx);
    CHECK(in.ids == Ids{kClsId, 10, 11, 12, kSepId, 20, 21, 22, 23});
    CHECK(in.segment == Ids{0, 0, 0, 0, 1, 1, 1, 1, 1});
    CHECK(in.mode == InputMode::ContextAware);

    auto bare = build_context_input(Ids{10, 11}, std::vector<Ids>{});
    CHECK(bare.ids == Ids{kClsId, 10, 11, kSepId});

    auto target = range_ids(10, 100);
    std::vector<Ids> big{range_ids(1000, 300)};
    auto trunc = build_context_input(target, big, 256);
    REQUIRE(trunc.size() == 256);
    CHECK(trunc.ids[101] == kSepId);
    CHECK(std::equal(trunc.ids.begin() + 1, trunc.ids.begin() + 101, target.begin()));
    CHECK(trunc.ids[102] == 1000);
    CHECK(trunc.ids.back() == 1000 + 153);

    auto head = build_context_input(target, big, 256, ContextTruncation::Head);
    CHECK(head.ids[102] == 1000 + 146);
    CHECK(head.ids.back() == 1000 + 299);

    auto target_cut = build_context_input(range_ids(10, 300), big, 256);
    CHECK(target_cut.size() == 256);
    CHECK(target_cut.ids.back() == kSepId);
    CHECK(target_cut.ids[254] == 10 + 253);
}

TEST_CASE("pad_batch examples") {
    auto single = build_target_input(range_ids(10, 5));
    std::vector<ModelInput> one{single};
    auto b1 = pad_batch(one);
    CHECK(b1.length() == 6);
    CHECK(b1.mask.minCoeff() == 1);
    CHECK_FALSE(b1.labels.has_value());

    std::vector<ModelInput> two{build_context_input(range_ids(10, 4), std::vector<Ids>{}),
                                build_context_input(range_ids(10, 3), std::vector<Ids>{{20, 21, 22}})};
    REQUIRE(two[0].size() == 6);
    REQUIRE(two[1].size() == 8);
    auto ctx_two = two;
    ctx_two[1] = build_context_input(range_ids(10, 3), std::vector<Ids>{{20, 21, 22, 23}});
    auto b2 = pad_batch(ctx_two, Ids{1, 0});
    CHECK(b2.length() == 9);
    CHECK(b2.rows() == 2);
    for (int j = 0; j < 9; ++j) {
        CHECK(b2.mask(0, j) == (j < 6 ? 1 : 0));
        if (j >= 6) {
            CHECK(b2.ids(0, j) == kPadId);
            CHECK(b2.segment(0, j) == 0);
        }
    }
    CHECK(b2.ids(1, 0) == kClsId);
    CHECK(b2.labels == Ids{1, 0});
    CHECK(b2.mode == InputMode::ContextAware);
}

TEST_CASE("pad_batch errors") {
    CHECK_THROWS_AS(pad_batch(std::vector<ModelInput>{}), Error);
    std::vector<ModelInput> mixed{build_target_input(Ids{5}), build_context_input(Ids{5}, std::vector<Ids>{})};
    try {
        pad_batch(mixed);
        FAIL("expected MixedMode");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MixedMode);
    }
    std::vector<ModelInput> ok{build_target_input(Ids{5})};
    CHECK_THROWS_AS(pad_batch(ok, Ids{1, 0}), Error);
}

TEST_CASE("properties over random threads") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<std::size_t> tlen(0, 160), clen(0, 120), nctx(0, 4), maxlen(2, 300);
    std::uniform_int_distribution<int> tok(4, 500);
    auto draw = [&](std::size_t n) {
        Ids out(n);
        for (auto& x : out) x = tok(rng);
        return out;
    };
    for (int trial = 0; trial < 300; ++trial) {
        const Ids target = draw(tlen(rng));
        std::vector<Ids> ctx(nctx(rng));
        for (auto& c : ctx) c = draw(clen(rng));
        const std::size_t m = maxlen(rng);
        std::size_t context_total = 0;
        for (auto& c : ctx) context_total += c.size();

        auto to = build_target_input(target, m);
        auto ca = build_context_input(target, ctx, m);
        check_well_formed(to, m);
        check_well_formed(ca, m);

        // No context: context input = target input + SEP, when the target fits.
        if (target.size() + 2 <= m) {
            auto bare = build_context_input(target, std::vector<Ids>{}, m);
            Ids expected = build_target_input(target, m).ids;
            expected.push_back(kSepId);
            CHECK(bare.ids == expected);
        }

        // Target tokens are never dropped while context tokens remain.
        const auto sep = static_cast<std::size_t>(std::find(ca.ids.begin(), ca.ids.end(), kSepId) - ca.ids.begin());
        const std::size_t kept_target = sep - 1;
        const std::size_t kept_context = ca.size() - sep - 1;
        if (kept_context > 0) CHECK(kept_target == target.size());
        CHECK(kept_target == std::min(target.size(), m - 2));
        CHECK(kept_context == std::min(context_total, m - 2 - kept_target));

        // Target positions agree between the two inputs.
        const std::size_t shared = std::min(to.size(), sep);
        CHECK(std::equal(to.ids.begin(), to.ids.begin() + static_cast<std::ptrdiff_t>(shared), ca.ids.begin()));

        for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca.segment[i] == (i < sep ? 0 : 1));
    }
}

TEST_CASE("batch mask matches padding exactly") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(0, 40), rows(1, 8);
    std::uniform_int_distribution<int> tok(4, 99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ModelInput> inputs;
        for (std::size_t r = 0, n = rows(rng); r < n; ++r) {
            Ids t(len(rng));
            for (auto& x : t) x = tok(rng);
            inputs.push_back(build_context_input(t, std::vector<Ids>{t}, 64));
        }
        auto b = pad_batch(inputs);
        std::size_t longest = 0;
        for (auto& in : inputs) longest = std::max(longest, in.size());
        CHECK(static_cast<std::size_t>(b.length()) == longest);
        for (Eigen::Index i = 0; i < b.rows(); ++i) {
            bool seen_pad = false;
            for (Eigen::Index j = 0; j < b.length(); ++j) {
                const bool pad = b.ids(i, j) == kPadId;
                CHECK(b.mask(i, j) == (pad ? 0 : 1));
                if (b.mask(i, j) == 0) seen_pad = true;
                else CHECK_FALSE(seen_pad);
            }
            const auto& src = inputs[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < src.size(); ++j) CHECK(b.ids(i, static_cast<Eigen::Index>(j)) == src.ids[j]);
        }
    }
}

TEST_CASE("build_input dispatches on mode") {
    Vocabulary vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "hi", "there", "#not"});
    ConversationThread t{"x", {"hi there", "#not hi"}, "hi you", Label::Sarcasm};
    SequenceConfig seq;
    seq.mode = InputMode::TargetOriented;
    CHECK(build_input(t, vocab, {}, seq).ids == Ids{kClsId, 4, kUnkId});
    seq.mode = InputMode::ContextAware;
    CHECK(build_input(t, vocab, {}, seq).ids == Ids{kClsId, 4, kUnkId, kSepId, 4, 5, 6, 4});
    CHECK(parse_mode("target") == InputMode::TargetOriented);
    CHECK(parse_mode("context") == InputMode::ContextAware);
    CHECK_THROWS_AS(parse_mode("both"), Error);
}
