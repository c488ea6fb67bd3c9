#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "sim/gsu.hpp"
#include "sim/model.hpp"

using namespace sim;

namespace {

ModelConfig tiny_cfg(GsuMode mode = GsuMode::kHard) {
    ModelConfig cfg;
    cfg.item_vocab = 64;
    cfg.cat_vocab = 16;
    cfg.heads = 2;
    cfg.mode = mode;
    cfg.alpha = mode == GsuMode::kSoft ? 1.0 : 0.0;
    cfg.init_seed = 11;
    return cfg;
}

void set_identity(Mat& m) {
    m.fill(0.0);
    for (int i = 0; i < std::min(m.rows, m.cols); ++i) m.at(i, i) = 1.0;
}

// Zero a whole embedding table, then poke specific rows.
void zero_table(EmbeddingTable& t) {
    for (auto& x : t.raw()) x = 0.0;
}

}  // namespace

TEST_CASE("hard_filter keeps the candidate's category, most recent first") {
    BehaviorSequence seq;
    seq.behaviors = {{1, 1, 10}, {2, 2, 20}, {3, 1, 30}};
    const CandidateItem cand{9, 1, 100};
    const BehaviorSequence got = hard_filter(seq, cand, 10);
    REQUIRE(got.size() == 2);
    CHECK(got.behaviors[0].item_id == 1);
    CHECK(got.behaviors[1].item_id == 3);

    CHECK(hard_filter(seq, {9, 7, 100}, 10).empty());

    BehaviorSequence many;
    for (int i = 0; i < 300; ++i) many.behaviors.push_back({i, 4, 1000 + i});
    const BehaviorSequence top = hard_filter(many, {9, 4, 5000}, 200);
    REQUIRE(top.size() == 200);
    CHECK(top.behaviors.front().item_id == 100);
    CHECK(top.behaviors.back().item_id == 299);
}

TEST_CASE("hard_search equals brute-force category filter on random instances") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(0, 80));
        UbtBuilder builder;
        BehaviorSequence seq;
        std::int64_t t = 0;
        for (int i = 0; i < n; ++i) {
            t += rng.uniform_int(1, 100);
            Behavior b{rng.uniform_int(0, 30), rng.uniform_int(0, 4), t};
            seq.behaviors.push_back(b);
            builder.add(1, b);
        }
        const UserBehaviorTree tree = std::move(builder).build(0);
        const CandidateItem cand{0, rng.uniform_int(0, 4), t + 10};
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, 20));

        // oracle: filter then take the last k
        std::vector<Behavior> expect;
        for (const auto& b : seq.behaviors)
            if (b.category_id == cand.category_id) expect.push_back(b);
        if (expect.size() > k) expect.erase(expect.begin(), expect.end() - static_cast<long>(k));

        CHECK(hard_filter(seq, cand, k).behaviors == expect);
        CHECK(hard_search(tree, 1, cand, k).behaviors == expect);
    }
}

TEST_CASE("soft_relevance closed forms and oracle") {
    GsuParams p;
    p.w_b = Mat(4, 4);
    p.w_a = Mat(4, 4);
    set_identity(p.w_b);
    set_identity(p.w_a);
    const Vec basis{1, 0, 0, 0};
    CHECK(soft_relevance(basis, basis, p) == doctest::Approx(1.0));
    const Vec other{0, 1, 0, 0};
    CHECK(soft_relevance(basis, other, p) == doctest::Approx(0.0));
    CHECK_THROWS_AS(soft_relevance({1, 2}, basis, p), std::invalid_argument);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Mat wb(4, 4), wa(4, 4);
        for (auto& x : wb.a) x = rng.normal();
        for (auto& x : wa.a) x = rng.normal();
        Vec e_i(4), e_a(4);
        for (auto& x : e_i) x = rng.normal();
        for (auto& x : e_a) x = rng.normal();
        GsuParams q;
        q.w_b = wb;
        q.w_a = wa;
        CHECK(soft_relevance(e_i, e_a, q) ==
              doctest::Approx(oracles::bilinear_relevance(e_i, e_a, wb, wa)).epsilon(1e-6));
    }
}

TEST_CASE("soft_search_exact matches the full-sort oracle") {
    const SimModel model = SimModel::init(tiny_cfg(GsuMode::kSoft));
    Rng rng(17);

    // k >= T returns the whole sequence
    const TrainingSample small = oracles::random_sample(rng, 64, 16, 5, 0);
    CHECK(soft_search_exact(small.long_seq, small.candidate, model, 10).behaviors ==
          small.long_seq.behaviors);

    // T=500, k=50: same set as brute-force sort by relevance
    const TrainingSample big = oracles::random_sample(rng, 64, 16, 500, 0);
    const BehaviorSequence got = soft_search_exact(big.long_seq, big.candidate, model, 50);
    REQUIRE(got.size() == 50);
    CHECK(got.is_time_ordered());

    const Vec e_a = gsu_candidate_embedding(model, big.candidate);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < big.long_seq.size(); ++i) {
        scored.emplace_back(oracles::bilinear_relevance(behavior_embedding(model, big.long_seq[i]),
                                                        e_a, model.gsu.w_b, model.gsu.w_a),
                            i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });
    std::set<std::size_t> expect_idx;
    for (int i = 0; i < 50; ++i) expect_idx.insert(scored[i].second);
    std::set<std::size_t> got_idx;
    for (const auto& b : got.behaviors) {
        for (std::size_t i = 0; i < big.long_seq.size(); ++i)
            if (big.long_seq[i] == b) got_idx.insert(i);
    }
    CHECK(got_idx == expect_idx);

    // a strictly dominant behavior is always included
    SimModel dominant = model;
    zero_table(dominant.item_emb);
    zero_table(dominant.cat_emb);
    set_identity(dominant.gsu.w_b);
    set_identity(dominant.gsu.w_a);
    // behavior item 3 aligned with candidate item 5
    for (int i = 0; i < 4; ++i) {
        dominant.item_emb.row(dominant.item_emb.row_of(3))[i] = 10.0;
        dominant.item_emb.row(dominant.item_emb.row_of(5))[i] = 10.0;
    }
    BehaviorSequence seq;
    for (int i = 0; i < 30; ++i) seq.behaviors.push_back({(i == 7) ? 3 : 20 + i, 1, 100 + i});
    const BehaviorSequence sel = soft_search_exact(seq, {5, 1, 10000}, dominant, 3);
    bool found = false;
    for (const auto& b : sel.behaviors) found |= (b.item_id == 3);
    CHECK(found);
}

TEST_CASE("sample_subsequence") {
    Rng rng(5);
    const TrainingSample small = oracles::random_sample(rng, 64, 16, 50, 0);
    CHECK(sample_subsequence(small.long_seq, 100, 9).behaviors == small.long_seq.behaviors);

    const TrainingSample big = oracles::random_sample(rng, 64, 16, 1000, 0);
    const BehaviorSequence w1 = sample_subsequence(big.long_seq, 100, 9);
    REQUIRE(w1.size() == 100);
    // contiguous window, order preserved
    std::size_t start = 0;
    while (start < big.long_seq.size() && !(big.long_seq[start] == w1.behaviors[0])) ++start;
    REQUIRE(start + 100 <= big.long_seq.size());
    for (std::size_t i = 0; i < 100; ++i) CHECK(big.long_seq[start + i] == w1.behaviors[i]);

    const BehaviorSequence w2 = sample_subsequence(big.long_seq, 100, 9);
    CHECK(w1.behaviors == w2.behaviors);  // deterministic under seed
    const BehaviorSequence w3 = sample_subsequence(big.long_seq, 100, 10);
    CHECK(w3.size() == 100);
}

TEST_CASE("gsu_aux_forward closed forms") {
    SimModel model = SimModel::init(tiny_cfg(GsuMode::kSoft));
    const int d = model.cfg.embed_dim;

    // all relevance scores zero -> U_r is the zero vector
    SimModel zero_rel = model;
    zero_rel.gsu.w_b.fill(0.0);
    Rng rng(1);
    const TrainingSample s = oracles::random_sample(rng, 64, 16, 10, 0);
    const GsuAuxOutput out0 = gsu_aux_forward(s.long_seq, s.candidate, zero_rel);
    for (int i = 0; i < d; ++i) CHECK(out0.u_r[i] == 0.0);
    CHECK(out0.p_click > 0.0);
    CHECK(out0.p_click < 1.0);

    // single behavior with r = 1 -> U_r equals its embedding
    SimModel unit = model;
    zero_table(unit.item_emb);
    zero_table(unit.cat_emb);
    set_identity(unit.gsu.w_b);
    set_identity(unit.gsu.w_a);
    unit.item_emb.row(unit.item_emb.row_of(2))[0] = 1.0;  // e_i = (1,0,0,0)
    unit.item_emb.row(unit.item_emb.row_of(9))[0] = 1.0;  // e_a = (1,0,0,0), r = 1
    BehaviorSequence one;
    one.behaviors.push_back({2, 3, 100});
    const GsuAuxOutput out1 = gsu_aux_forward(one, {9, 5, 200}, unit);
    CHECK(out1.u_r[0] == doctest::Approx(1.0));
    for (int i = 1; i < d; ++i) CHECK(out1.u_r[i] == doctest::Approx(0.0));

    // empty long sequence -> U_r is zero, p still defined
    const GsuAuxOutput out2 = gsu_aux_forward(BehaviorSequence{}, s.candidate, model);
    for (int i = 0; i < d; ++i) CHECK(out2.u_r[i] == 0.0);
    CHECK(out2.p_click > 0.0);
    CHECK(out2.p_click < 1.0);
}

TEST_CASE("gsu_aux_forward U_r matches the hand-computed weighted sum") {
    const SimModel model = SimModel::init(tiny_cfg(GsuMode::kSoft));
    Rng rng(23);
    const TrainingSample s = oracles::random_sample(rng, 64, 16, 20, 0);
    const GsuAuxOutput out = gsu_aux_forward(s.long_seq, s.candidate, model);

    const Vec e_a = gsu_candidate_embedding(model, s.candidate);
    Vec expect(model.cfg.embed_dim, 0.0);
    for (const auto& b : s.long_seq.behaviors) {
        const Vec e_i = behavior_embedding(model, b);
        const double r = oracles::bilinear_relevance(e_i, e_a, model.gsu.w_b, model.gsu.w_a);
        for (int i = 0; i < model.cfg.embed_dim; ++i) expect[i] += r * e_i[i];
    }
    for (int i = 0; i < model.cfg.embed_dim; ++i)
        CHECK(out.u_r[i] == doctest::Approx(expect[i]).epsilon(1e-6));

    // U_r is linear in each embedding at fixed relevance: doubling one
    // behavior's contribution via r doubles its term (checked through the
    // weighted-sum oracle above); here check output p stays in (0,1).
    CHECK(out.p_click > 0.0);
    CHECK(out.p_click < 1.0);
}

TEST_CASE("coverage_stat") {
    using Set = std::set<std::int64_t>;
    CHECK(coverage_stat({Set{1, 2}, Set{3}}, {Set{1, 2}, Set{3}}) == doctest::Approx(1.0));
    CHECK(coverage_stat({Set{1, 2}, Set{3}}, {Set{7}, Set{8}}) == doctest::Approx(0.0));
    CHECK(coverage_stat({Set{1, 2, 3}}, {Set{2, 3, 4, 5}}) == doctest::Approx(0.5));
    // samples with empty soft sets are skipped
    CHECK(coverage_stat({Set{1}, Set{1}}, {Set{}, Set{1}}) == doctest::Approx(1.0));
    CHECK_THROWS(coverage_stat({}, {}));
    CHECK_THROWS(coverage_stat({Set{1}}, {Set{}}));
    CHECK_THROWS_AS(coverage_stat({Set{1}}, {Set{1}, Set{2}}), std::invalid_argument);
}
