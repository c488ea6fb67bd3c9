#include "sim/gsu.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "sim/model.hpp"
#include "sim/rng.hpp"

namespace sim {

BehaviorSequence hard_filter(const BehaviorSequence& seq, const CandidateItem& cand,
                             std::size_t k) {
    if (k == 0) throw std::invalid_argument("hard_filter: k must be > 0");
    // Walk backwards (most recent first) collecting category matches.
    std::vector<Behavior> picked;
    for (auto it = seq.behaviors.rbegin(); it != seq.behaviors.rend() && picked.size() < k; ++it) {
        if (it->category_id == cand.category_id) picked.push_back(*it);
    }
    std::reverse(picked.begin(), picked.end());
    return BehaviorSequence(std::move(picked));
}

double soft_relevance(const Vec& e_i, const Vec& e_a, const GsuParams& p) {
    if (static_cast<int>(e_i.size()) != p.w_b.cols || static_cast<int>(e_a.size()) != p.w_a.cols)
        throw std::invalid_argument("soft_relevance: embedding dimension mismatch");
    return dot(matvec(p.w_b, e_i), matvec(p.w_a, e_a));
}

BehaviorSequence soft_search_exact(const BehaviorSequence& long_seq, const CandidateItem& cand,
                                   const SimModel& model, std::size_t k) {
    if (k == 0) throw std::invalid_argument("soft_search_exact: k must be > 0");
    const std::size_t n = long_seq.size();
    if (n <= k) return long_seq;

    const Vec e_a = gsu_candidate_embedding(model, cand);
    const Vec query = matvec(model.gsu.w_a, e_a);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec e_i = behavior_embedding(model, long_seq[i]);
        score[i] = dot(matvec(model.gsu.w_b, e_i), query);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Ties prefer the more recent behavior (larger index = later in time).
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (score[a] != score[b]) return score[a] > score[b];
                          return a > b;
                      });
    std::vector<std::size_t> top(order.begin(), order.begin() + k);
    std::sort(top.begin(), top.end());  // back to chronological order

    BehaviorSequence out;
    out.behaviors.reserve(k);
    for (std::size_t idx : top) out.behaviors.push_back(long_seq[idx]);
    return out;
}

BehaviorSequence sample_subsequence(const BehaviorSequence& seq, std::size_t max_len,
                                    std::uint64_t seed) {
    if (max_len == 0) throw std::invalid_argument("sample_subsequence: max_len must be > 0");
    const std::size_t n = seq.size();
    if (n <= max_len) return seq;
    Rng rng(seed);
    const auto start = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(n - max_len)));
    BehaviorSequence out;
    out.behaviors.assign(seq.behaviors.begin() + start, seq.behaviors.begin() + start + max_len);
    return out;
}

GsuAuxOutput gsu_aux_forward(const BehaviorSequence& long_seq, const CandidateItem& cand,
                             const SimModel& model, GsuAuxCache* cache) {
    const int d = model.cfg.embed_dim;
    Vec e_a = gsu_candidate_embedding(model, cand);
    Vec v = matvec(model.gsu.w_a, e_a);
    Vec u_r(d, 0.0);
    std::vector<Vec> e, u;
    Vec r;
    for (const auto& b : long_seq.behaviors) {
        Vec e_i = behavior_embedding(model, b);
        Vec u_i = matvec(model.gsu.w_b, e_i);
        const double r_i = dot(u_i, v);
        axpy(u_r, e_i, r_i);
        if (cache) {
            e.push_back(std::move(e_i));
            u.push_back(std::move(u_i));
            r.push_back(r_i);
        }
    }
    Vec input(2 * d);
    for (int i = 0; i < d; ++i) {
        input[i] = u_r[i];
        input[d + i] = e_a[i];
    }
    Mlp::Cache local_mlp;
    const Vec logits = model.gsu.aux_mlp.forward(input, cache ? &cache->mlp : &local_mlp);
    const double p = two_way_probability(logits);
    if (cache) {
        cache->e_a = std::move(e_a);
        cache->v = std::move(v);
        cache->e = std::move(e);
        cache->u = std::move(u);
        cache->r = std::move(r);
        cache->u_r = u_r;
        cache->input = std::move(input);
        cache->p = p;
    }
    return {std::move(u_r), p};
}

double coverage_stat(const std::vector<std::set<std::int64_t>>& hard_sets,
                     const std::vector<std::set<std::int64_t>>& soft_sets) {
    if (hard_sets.size() != soft_sets.size())
        throw std::invalid_argument("coverage_stat: sample count mismatch");
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t s = 0; s < hard_sets.size(); ++s) {
        const auto& soft = soft_sets[s];
        if (soft.empty()) continue;
        std::size_t inter = 0;
        for (std::int64_t id : soft)
            if (hard_sets[s].count(id)) ++inter;
        sum += static_cast<double>(inter) / static_cast<double>(soft.size());
        ++counted;
    }
    if (counted == 0)
        throw std::runtime_error("coverage_stat: no samples with nonempty soft sets");
    return sum / static_cast<double>(counted);
}

}  // namespace sim
