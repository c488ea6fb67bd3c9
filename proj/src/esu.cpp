#include "sim/esu.hpp"

#include <algorithm>

#include "sim/model.hpp"

namespace sim {

std::vector<Vec> encode_sbs(const BehaviorSequence& sbs, const CandidateItem& cand,
                            const SimModel& model) {
    const int d = model.cfg.embed_dim;
    const int dt = model.cfg.time_dim_effective();
    std::vector<Vec> z;
    z.reserve(sbs.size());
    for (const auto& b : sbs.behaviors) {
        Vec zj(d + dt);
        const Vec e = behavior_embedding(model, b);
        std::copy(e.begin(), e.end(), zj.begin());
        if (dt > 0) {
            const int bucket = bucketize_delta(time_delta_days(b, cand), model.cfg.buckets);
            const double* te = model.time_emb.row(model.time_emb.row_of(bucket));
            std::copy(te, te + dt, zj.begin() + d);
        }
        z.push_back(std::move(zj));
    }
    return z;
}

MultiHeadOutput multi_head_attention(const std::vector<Vec>& z, const Vec& e_a,
                                     const EsuParams& p, AttentionCache* cache) {
    if (z.empty()) throw std::invalid_argument("multi_head_attention: empty behavior list");
    const int dz = static_cast<int>(z.front().size());
    const std::size_t n = z.size();
    MultiHeadOutput out;
    out.u_lt.reserve(static_cast<std::size_t>(p.heads) * dz);
    if (cache) {
        cache->q.clear();
        cache->proj.clear();
    }
    for (int h = 0; h < p.heads; ++h) {
        const Mat& wb = p.w_b[h];
        const Mat& wa = p.w_a[h];
        if (wb.cols != dz || static_cast<int>(e_a.size()) != wa.cols)
            throw std::invalid_argument("multi_head_attention: dimension mismatch");
        Vec q = matvec(wa, e_a);
        std::vector<Vec> proj(n);
        Vec logits(n);
        for (std::size_t j = 0; j < n; ++j) {
            proj[j] = matvec(wb, z[j]);
            logits[j] = dot(proj[j], q);
        }
        const double max_logit = *std::max_element(logits.begin(), logits.end());
        Vec score(n);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            score[j] = std::exp(logits[j] - max_logit);
            denom += score[j];
        }
        Vec head(dz, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            score[j] /= denom;
            axpy(head, proj[j], score[j]);
        }
        out.u_lt.insert(out.u_lt.end(), head.begin(), head.end());
        out.trace.scores.push_back(std::move(score));
        out.trace.heads.push_back(std::move(head));
        if (cache) {
            cache->q.push_back(std::move(q));
            cache->proj.push_back(std::move(proj));
        }
    }
    return out;
}

// Sum-pooled short-term interest; the learned stand-in covers cold users.
static Vec short_term_vector(const BehaviorSequence& short_seq, const SimModel& model) {
    if (short_seq.empty()) return model.esu.no_history_short;
    Vec pooled(model.cfg.embed_dim, 0.0);
    for (const auto& b : short_seq.behaviors) axpy(pooled, behavior_embedding(model, b));
    return pooled;
}

double esu_forward_cached(const BehaviorSequence& sbs, const BehaviorSequence& short_seq,
                          const CandidateItem& cand, const SimModel& model, EsuCache& cache) {
    cache.e_a = esu_candidate_embedding(model, cand);
    cache.sbs_empty = sbs.empty();
    cache.z = cache.sbs_empty ? std::vector<Vec>{model.esu.no_history_z}
                              : encode_sbs(sbs, cand, model);

    MultiHeadOutput mh = multi_head_attention(cache.z, cache.e_a, model.esu, &cache.attn);
    cache.trace = std::move(mh.trace);

    cache.short_empty = short_seq.empty();
    cache.short_vec = short_term_vector(short_seq, model);

    cache.input.clear();
    cache.input.reserve(mh.u_lt.size() + cache.short_vec.size() + cache.e_a.size());
    cache.input.insert(cache.input.end(), mh.u_lt.begin(), mh.u_lt.end());
    cache.input.insert(cache.input.end(), cache.short_vec.begin(), cache.short_vec.end());
    cache.input.insert(cache.input.end(), cache.e_a.begin(), cache.e_a.end());

    const Vec logits = model.esu.mlp.forward(cache.input, &cache.mlp);
    cache.p = two_way_probability(logits);
    return cache.p;
}

double esu_forward(const BehaviorSequence& sbs, const BehaviorSequence& short_seq,
                   const CandidateItem& cand, const SimModel& model, AttentionTrace* trace) {
    EsuCache cache;
    const double p = esu_forward_cached(sbs, short_seq, cand, model, cache);
    if (trace) *trace = std::move(cache.trace);
    return p;
}

}  // namespace sim
