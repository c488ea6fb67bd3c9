#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sim/mat.hpp"
#include "sim/mlp.hpp"
#include "sim/types.hpp"

namespace sim {

struct SimModel;

// Stage-two parameters. Per head i, W_bi projects behavior encodings z_j
// (d_z = d + d_t) and W_ai maps the candidate's concat(item, category)
// embedding (2d) into the same space. d_t is 0 when time embeddings are off.
struct EsuParams {
    int heads = 4;
    std::vector<Mat> w_b;  // heads x (d_z x d_z)
    std::vector<Mat> w_a;  // heads x (d_z x 2d)
    Mlp mlp;               // CTR head over concat(U_lt, short-term, e_a)
    Vec no_history_z;      // learned stand-in when the SBS is empty
    Vec no_history_short;  // learned stand-in when the short sequence is empty
};

// Per-head attention scores (each a distribution over the K behaviors) and
// head outputs, kept for debugging dumps.
struct AttentionTrace {
    std::vector<Vec> scores;
    std::vector<Vec> heads;
};

// Behavior encodings for the SBS: z_j = concat(behavior embedding,
// time-bucket embedding of the behavior-to-request interval).
std::vector<Vec> encode_sbs(const BehaviorSequence& sbs, const CandidateItem& cand,
                            const SimModel& model);

struct MultiHeadOutput {
    Vec u_lt;  // concat(head_1 .. head_q), dimension heads * d_z
    AttentionTrace trace;
};

// Intermediates needed by the backward pass.
struct AttentionCache {
    std::vector<Vec> q;                // per head: W_ai e_a
    std::vector<std::vector<Vec>> proj;  // per head, per behavior: W_bi z_j
};

// score_j ∝ exp(dot(W_bi z_j, W_ai e_a)) per head, softmax over behaviors;
// head_i = sum_j score_j * (W_bi z_j).
MultiHeadOutput multi_head_attention(const std::vector<Vec>& z, const Vec& e_a,
                                     const EsuParams& p, AttentionCache* cache = nullptr);

struct EsuCache {
    Vec e_a;  // candidate embedding, 2d
    bool sbs_empty = false;
    std::vector<Vec> z;
    AttentionCache attn;
    AttentionTrace trace;
    bool short_empty = false;
    Vec short_vec;
    Vec input;
    Mlp::Cache mlp;
    double p = 0.0;
};

// Full stage-two CTR forward: multi-head attention over the SBS, sum-pooled
// short-term interest, candidate embedding, then the 200x80x2 head.
double esu_forward(const BehaviorSequence& sbs, const BehaviorSequence& short_seq,
                   const CandidateItem& cand, const SimModel& model,
                   AttentionTrace* trace = nullptr);

double esu_forward_cached(const BehaviorSequence& sbs, const BehaviorSequence& short_seq,
                          const CandidateItem& cand, const SimModel& model, EsuCache& cache);

// -[y ln p + (1-y) ln(1-p)], with p clamped to [1e-7, 1-1e-7].
inline double cross_entropy(double p, int label) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("cross_entropy: probability outside [0,1]");
    constexpr double kEps = 1e-7;
    const double q = std::min(1.0 - kEps, std::max(kEps, p));
    return label ? -std::log(q) : -std::log(1.0 - q);
}

}  // namespace sim
