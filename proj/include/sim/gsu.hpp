#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "sim/mat.hpp"
#include "sim/mlp.hpp"
#include "sim/ubt.hpp"

namespace sim {

struct SimModel;

// Stage-one search parameters: the two bilinear projections of the learned
// relevance r_i = dot(W_b e_i, W_a e_a), plus the auxiliary CTR head trained
// on long-term behaviors only.
struct GsuParams {
    Mat w_b;  // d x d
    Mat w_a;  // d x d
    Mlp aux_mlp;
};

// Non-parametric stage one: the k most recent behaviors in the candidate's
// category, straight off the behavior tree.
inline BehaviorSequence hard_search(const UserBehaviorTree& tree, std::int64_t user_id,
                                    const CandidateItem& cand, std::size_t k) {
    return tree.query(user_id, cand.category_id, k);
}

// Same filter applied to an in-memory sequence (training-side hard search).
BehaviorSequence hard_filter(const BehaviorSequence& seq, const CandidateItem& cand,
                             std::size_t k);

// dot(W_b e_i, W_a e_a); bilinear in both embeddings.
double soft_relevance(const Vec& e_i, const Vec& e_a, const GsuParams& p);

// Top-k behaviors by learned relevance, emitted in chronological order.
// Score ties prefer the more recent behavior.
BehaviorSequence soft_search_exact(const BehaviorSequence& long_seq, const CandidateItem& cand,
                                   const SimModel& model, std::size_t k);

// Uniformly chosen contiguous window of max_len when the sequence is longer;
// identity otherwise. Deterministic under seed.
BehaviorSequence sample_subsequence(const BehaviorSequence& seq, std::size_t max_len,
                                    std::uint64_t seed);

struct GsuAuxOutput {
    Vec u_r;         // relevance-weighted sum of behavior embeddings
    double p_click;  // auxiliary CTR prediction, in (0,1)
};

// Intermediates for the backward pass.
struct GsuAuxCache {
    Vec e_a;             // candidate embedding, d
    Vec v;               // W_a e_a
    std::vector<Vec> e;  // behavior embeddings
    std::vector<Vec> u;  // W_b e_i
    Vec r;               // relevance scores
    Vec u_r;
    Vec input;
    Mlp::Cache mlp;
    double p = 0.0;
};

// Auxiliary soft-search head: U_r = sum_i r_i e_i over the long sequence,
// then the aux MLP on concat(U_r, e_a).
GsuAuxOutput gsu_aux_forward(const BehaviorSequence& long_seq, const CandidateItem& cand,
                             const SimModel& model, GsuAuxCache* cache = nullptr);

// Mean over samples of |hard ∩ soft| / |soft|. Samples with an empty soft
// set are skipped; if nothing is countable the statistic is undefined.
double coverage_stat(const std::vector<std::set<std::int64_t>>& hard_sets,
                     const std::vector<std::set<std::int64_t>>& soft_sets);

}  // namespace sim
