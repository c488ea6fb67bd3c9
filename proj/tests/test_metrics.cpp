#include <doctest.h>

#include "oracles.hpp"
#include "sim/datagen.hpp"
#include "sim/metrics.hpp"
#include "sim/trainer.hpp"

using namespace sim;

TEST_CASE("auc closed forms") {
    CHECK(auc({0.9, 0.1}, {1, 0}) == doctest::Approx(1.0));
    CHECK(auc({0.1, 0.9}, {1, 0}) == doctest::Approx(0.0));
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(auc({0.5, 0.6}, {1, 1}), UndefinedMetricError);
    CHECK_THROWS_AS(auc({0.5}, {1, 0}), std::invalid_argument);
}

TEST_CASE("auc matches the pairwise oracle and is monotone-invariant") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(10, 1000));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            // coarse grid to force ties
            scores[i] = std::floor(rng.uniform() * 20.0) / 20.0;
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            has0 |= labels[i] == 0;
            has1 |= labels[i] == 1;
        }
        if (!has0 || !has1) continue;
        const double fast = auc(scores, labels);
        const double slow = oracles::pairwise_auc(scores, labels);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-12));

        // strictly monotone transform leaves AUC unchanged
        std::vector<double> warped(n);
        for (int i = 0; i < n; ++i) warped[i] = std::exp(3.0 * scores[i]) + 7.0;
        CHECK(auc(warped, labels) == doctest::Approx(fast).epsilon(1e-12));
    }
}

namespace {

TrainingSample click_with_history(std::vector<Behavior> history, std::int64_t cat,
                                  std::int64_t request_time, int short_len = 2) {
    TrainingSample s;
    s.label = 1;
    s.candidate = {999, cat, request_time};
    BehaviorSequence seq(std::move(history));
    auto [long_part, short_part] = split_short_long(seq, static_cast<std::size_t>(short_len));
    s.long_seq = std::move(long_part);
    s.short_seq = std::move(short_part);
    return s;
}

}  // namespace

TEST_CASE("d_category definitions") {
    const std::int64_t t0 = 1000 * 86400;
    // prior same-category behavior 5 days earlier
    CHECK(d_category(click_with_history({{1, 7, t0 - 5 * 86400}, {2, 3, t0 - 86400}}, 7, t0)) == 5);
    // never touched the category
    CHECK(d_category(click_with_history({{1, 7, t0 - 5 * 86400}}, 9, t0)) == -1);
    // same-day behavior
    CHECK(d_category(click_with_history({{1, 7, t0 - 100}}, 7, t0)) == 0);
    // not a click
    TrainingSample neg = click_with_history({{1, 7, t0 - 100}}, 7, t0);
    neg.label = 0;
    CHECK_THROWS_AS(d_category(neg), std::invalid_argument);
    // invariant to behaviors in other categories
    auto base = click_with_history({{1, 7, t0 - 5 * 86400}}, 7, t0);
    auto noisy = click_with_history(
        {{5, 1, t0 - 86400}, {1, 7, t0 - 5 * 86400}, {6, 2, t0 - 3600}}, 7, t0);
    CHECK(d_category(base) == d_category(noisy));
}

TEST_CASE("d_category matches the brute scan on random clicks") {
    Rng rng(103);
    for (int trial = 0; trial < 300; ++trial) {
        TrainingSample s = oracles::random_sample(rng, 60, 8, 20, 5);
        s.label = 1;
        CHECK(d_category(s) == oracles::d_category_scan(s));
    }
}

TEST_CASE("d_category_distribution bins") {
    // all -1 in one bin
    const DCategoryHistogram all_none = d_category_distribution({-1, -1, -1});
    CHECK(all_none.bins[0].count == 3);
    std::uint64_t total = 0;
    for (const auto& b : all_none.bins) total += b.count;
    CHECK(total == 3);

    // d=5 lands in [4,6); d=30 lands in the first long-term bin
    const DCategoryHistogram h = d_category_distribution({5, 30, -1, 0, 14});
    std::uint64_t sum = 0;
    for (const auto& b : h.bins) sum += b.count;
    CHECK(sum == 5);
    for (const auto& b : h.bins) {
        if (b.label == "[4,6)") CHECK(b.count == 1);
        if (b.label == "[15,35)") CHECK(b.count == 1);
    }
    CHECK(h.bins[0].count == 1);  // the -1
    CHECK_THROWS_AS(d_category_distribution({}), std::invalid_argument);
}

TEST_CASE("evaluate and compare_models") {
    GenConfig gen;
    gen.users = 400;
    gen.items = 2000;
    gen.categories = 50;
    gen.seed = 11;
    const GenOutput data = generate(gen);
    const auto samples = assemble_samples(data.behaviors, data.samples, gen.short_len);

    ModelConfig cfg;
    cfg.item_vocab = gen.items;
    cfg.cat_vocab = gen.categories;
    cfg.heads = 2;
    cfg.init_seed = 13;
    SimModel hard = SimModel::init(cfg);

    const EvalReport rep = evaluate(samples, hard);
    CHECK(rep.samples == samples.size());
    CHECK(rep.auc >= 0.0);
    CHECK(rep.auc <= 1.0);
    CHECK(rep.p_d_gt_neg1 >= 0.0);
    CHECK(rep.p_d_gt_neg1 <= 1.0);
    std::uint64_t total = 0;
    for (const auto& b : rep.histogram.bins) total += b.count;
    CHECK(total == rep.clicks);

    // identical models: all deltas zero
    const ModelComparison same = compare_models(samples, hard, hard);
    CHECK(same.delta_auc == 0.0);
    CHECK(same.delta_mean_d_category == 0.0);
    CHECK(same.delta_p_d_gt_neg1 == 0.0);
    CHECK(same.top_decile_mean_d_a == same.top_decile_mean_d_b);
}

TEST_CASE("trained long-term model up-ranks older category matches than the baseline") {
    GenConfig gen;
    gen.users = 800;
    gen.items = 4000;
    gen.categories = 60;
    gen.seed = 19;
    const GenOutput data = generate(gen);
    const auto samples = assemble_samples(data.behaviors, data.samples, gen.short_len);

    ModelConfig base_cfg;
    base_cfg.item_vocab = gen.items;
    base_cfg.cat_vocab = gen.categories;
    base_cfg.heads = 2;
    base_cfg.init_seed = 3;

    ModelConfig avg_cfg = base_cfg;
    avg_cfg.variant = ModelVariant::kAvgPool;
    SimModel avg = SimModel::init(avg_cfg);

    ModelConfig sim_cfg = base_cfg;
    SimModel hard = SimModel::init(sim_cfg);

    TrainOptions opts;
    opts.epochs = 3;
    opts.seed = 23;
    train(samples, avg, opts);
    train(samples, hard, opts);

    const ModelComparison cmp = compare_models(samples, avg, hard);
    // the search-based model concentrates clicked long-term matches in its
    // top decile; the no-search baseline cannot see individual old matches
    CHECK(cmp.b.auc > cmp.a.auc);
    CHECK(cmp.top_decile_mean_d_b > 0.0);
}
