#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "sim/esu.hpp"
#include "sim/model.hpp"

using namespace sim;

namespace {

ModelConfig esu_cfg(bool use_time = true, int heads = 2) {
    ModelConfig cfg;
    cfg.item_vocab = 64;
    cfg.cat_vocab = 16;
    cfg.heads = heads;
    cfg.use_time = use_time;
    cfg.init_seed = 31;
    return cfg;
}

}  // namespace

TEST_CASE("encode_sbs shapes and time slice") {
    const SimModel model = SimModel::init(esu_cfg());
    CHECK(model.cfg.z_dim() == 8);  // d=4, d_t=4

    BehaviorSequence one;
    one.behaviors.push_back({1, 2, 1000});
    const CandidateItem cand{3, 2, 1000 + 86400};
    const auto z1 = encode_sbs(one, cand, model);
    REQUIRE(z1.size() == 1);
    CHECK(z1[0].size() == 8);

    // same item/category, deltas 1 vs 300 days: z differs only in the time slice
    BehaviorSequence two;
    const std::int64_t t = 2000000000;
    two.behaviors.push_back({5, 7, t - 300 * 86400});
    two.behaviors.push_back({5, 7, t - 1 * 86400});
    const auto z2 = encode_sbs(two, {9, 7, t}, model);
    REQUIRE(z2.size() == 2);
    for (int i = 0; i < 4; ++i) CHECK(z2[0][i] == z2[1][i]);
    bool time_differs = false;
    for (int i = 4; i < 8; ++i) time_differs |= (z2[0][i] != z2[1][i]);
    CHECK(time_differs);

    // without time embeddings d_z = d
    const SimModel no_time = SimModel::init(esu_cfg(false));
    CHECK(no_time.cfg.z_dim() == 4);
    CHECK(encode_sbs(one, cand, no_time)[0].size() == 4);
}

TEST_CASE("multi_head_attention closed forms") {
    const SimModel model = SimModel::init(esu_cfg());
    Rng rng(41);
    const int dz = model.cfg.z_dim();

    // K=1: score 1.0, head = W_b z_1
    Vec z(dz), e_a(8);
    for (auto& x : z) x = rng.normal();
    for (auto& x : e_a) x = rng.normal();
    const MultiHeadOutput out1 = multi_head_attention({z}, e_a, model.esu);
    for (int h = 0; h < model.esu.heads; ++h) {
        REQUIRE(out1.trace.scores[h].size() == 1);
        CHECK(out1.trace.scores[h][0] == doctest::Approx(1.0));
        const Vec expect = matvec(model.esu.w_b[h], z);
        for (int i = 0; i < dz; ++i)
            CHECK(out1.trace.heads[h][i] == doctest::Approx(expect[i]).epsilon(1e-9));
    }
    CHECK(out1.u_lt.size() == static_cast<std::size_t>(model.esu.heads * dz));

    // K identical behaviors: uniform scores
    const std::vector<Vec> same(6, z);
    const MultiHeadOutput out6 = multi_head_attention(same, e_a, model.esu);
    for (int h = 0; h < model.esu.heads; ++h)
        for (double s : out6.trace.scores[h]) CHECK(s == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("multi_head_attention matches the step-by-step oracle") {
    const SimModel model = SimModel::init(esu_cfg(true, 2));
    Rng rng(43);
    std::vector<Vec> z(8, Vec(model.cfg.z_dim()));
    for (auto& v : z)
        for (auto& x : v) x = rng.normal();
    Vec e_a(8);
    for (auto& x : e_a) x = rng.normal();

    const MultiHeadOutput got = multi_head_attention(z, e_a, model.esu);
    const Vec expect = oracles::attention_u_lt(z, e_a, model.esu);
    REQUIRE(got.u_lt.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(got.u_lt[i] == doctest::Approx(expect[i]).epsilon(1e-6));
}

TEST_CASE("attention scores are a distribution; permutation equivariance") {
    const SimModel model = SimModel::init(esu_cfg());
    Rng rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = static_cast<int>(rng.uniform_int(1, 12));
        std::vector<Vec> z(k, Vec(model.cfg.z_dim()));
        for (auto& v : z)
            for (auto& x : v) x = rng.normal();
        Vec e_a(8);
        for (auto& x : e_a) x = rng.normal();

        const MultiHeadOutput out = multi_head_attention(z, e_a, model.esu);
        for (int h = 0; h < model.esu.heads; ++h) {
            double sum = 0.0;
            for (double s : out.trace.scores[h]) {
                CHECK(s >= 0.0);
                sum += s;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }

        // reverse the list: scores reverse, pooled output unchanged
        std::vector<Vec> rev(z.rbegin(), z.rend());
        const MultiHeadOutput out_rev = multi_head_attention(rev, e_a, model.esu);
        for (int h = 0; h < model.esu.heads; ++h) {
            for (int j = 0; j < k; ++j)
                CHECK(out_rev.trace.scores[h][j] ==
                      doctest::Approx(out.trace.scores[h][k - 1 - j]).epsilon(1e-9));
        }
        for (std::size_t i = 0; i < out.u_lt.size(); ++i)
            CHECK(out_rev.u_lt[i] == doctest::Approx(out.u_lt[i]).epsilon(1e-6));
    }
}

TEST_CASE("attention is not scale-invariant (no hidden normalization)") {
    const SimModel model = SimModel::init(esu_cfg());
    Rng rng(53);
    std::vector<Vec> z(5, Vec(model.cfg.z_dim()));
    for (auto& v : z)
        for (auto& x : v) x = rng.normal();
    Vec e_a(8);
    for (auto& x : e_a) x = rng.normal();
    std::vector<Vec> z2 = z;
    for (auto& v : z2)
        for (auto& x : v) x *= 2.0;
    const Vec a = multi_head_attention(z, e_a, model.esu).u_lt;
    const Vec b = multi_head_attention(z2, e_a, model.esu).u_lt;
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs |= (std::abs(a[i] - b[i]) > 1e-9);
    CHECK(differs);
}

TEST_CASE("esu_forward basics") {
    const SimModel model = SimModel::init(esu_cfg());
    Rng rng(59);
    const TrainingSample s = oracles::random_sample(rng, 64, 16, 30, 5);
    const BehaviorSequence sbs = hard_filter(s.long_seq, s.candidate, 200);

    const double p = esu_forward(sbs, s.short_seq, s.candidate, model);
    CHECK(p > 0.0);
    CHECK(p < 1.0);

    // deterministic: bit-identical across calls
    CHECK(esu_forward(sbs, s.short_seq, s.candidate, model) == p);

    // empty SBS and empty short sequence still defined (no-history vectors)
    const double p_cold = esu_forward(BehaviorSequence{}, BehaviorSequence{}, s.candidate, model);
    CHECK(p_cold > 0.0);
    CHECK(p_cold < 1.0);

    // scaling the embeddings changes the output (scale sensitivity)
    SimModel scaled = model;
    for (auto& x : scaled.item_emb.raw()) x *= 2.0;
    CHECK(esu_forward(sbs, s.short_seq, s.candidate, scaled) != p);

    // attention trace is exposed
    AttentionTrace trace;
    esu_forward(sbs, s.short_seq, s.candidate, model, &trace);
    CHECK(trace.scores.size() == static_cast<std::size_t>(model.esu.heads));
}

TEST_CASE("cross_entropy closed forms") {
    CHECK(cross_entropy(0.5, 1) == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy(0.5, 0) == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy(1.0 - 1e-9, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(cross_entropy(0.9, 0) == doctest::Approx(2.302585).epsilon(1e-5));
    CHECK(cross_entropy(1.0, 1) == doctest::Approx(1e-7).epsilon(1e-2));  // clamped
    CHECK_THROWS_AS(cross_entropy(1.5, 1), std::domain_error);
    CHECK_THROWS_AS(cross_entropy(-0.1, 0), std::domain_error);
}
