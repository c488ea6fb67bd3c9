#include "sim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sim/metrics.hpp"
#include "sim/rng.hpp"

namespace sim {

namespace {

void add_row_grad(std::map<std::int64_t, Vec>& rows, std::int64_t row, const double* g, int d,
                  double scale = 1.0) {
    auto it = rows.find(row);
    if (it == rows.end()) it = rows.emplace(row, Vec(d, 0.0)).first;
    for (int i = 0; i < d; ++i) it->second[i] += scale * g[i];
}

// Mean-pooled long-term baseline (no search, no attention).
struct AvgPoolCache {
    Vec e_a;
    std::size_t long_n = 0;
    Vec avg_long;
    bool short_empty = false;
    Vec short_vec;
    Vec input;
    Mlp::Cache mlp;
    double p = 0.0;
};

double avgpool_forward_cached(const TrainingSample& s, const SimModel& model, AvgPoolCache& c) {
    const int d = model.cfg.embed_dim;
    c.e_a = esu_candidate_embedding(model, s.candidate);
    c.long_n = s.long_seq.size();
    c.avg_long.assign(d, 0.0);
    if (c.long_n > 0) {
        for (const auto& b : s.long_seq.behaviors)
            axpy(c.avg_long, behavior_embedding(model, b));
        for (auto& x : c.avg_long) x /= static_cast<double>(c.long_n);
    }
    c.short_empty = s.short_seq.empty();
    if (c.short_empty) {
        c.short_vec = model.esu.no_history_short;
    } else {
        c.short_vec.assign(d, 0.0);
        for (const auto& b : s.short_seq.behaviors)
            axpy(c.short_vec, behavior_embedding(model, b));
    }
    c.input.clear();
    c.input.insert(c.input.end(), c.avg_long.begin(), c.avg_long.end());
    c.input.insert(c.input.end(), c.short_vec.begin(), c.short_vec.end());
    c.input.insert(c.input.end(), c.e_a.begin(), c.e_a.end());
    c.p = two_way_probability(model.esu.mlp.forward(c.input, &c.mlp));
    return c.p;
}

// Enumerates all non-embedding dense parameter blocks in a fixed order,
// shared by AdamState allocation and the update step.
template <typename F>
void zip_dense(SimModel& m, F&& f) {
    f(m.gsu.w_b.a.data(), m.gsu.w_b.a.size(), 0);
    f(m.gsu.w_a.a.data(), m.gsu.w_a.a.size(), 1);
    int slot = 2;
    for (std::size_t l = 0; l < m.gsu.aux_mlp.w.size(); ++l) {
        f(m.gsu.aux_mlp.w[l].a.data(), m.gsu.aux_mlp.w[l].a.size(), slot++);
        f(m.gsu.aux_mlp.b[l].data(), m.gsu.aux_mlp.b[l].size(), slot++);
    }
    for (int h = 0; h < m.esu.heads; ++h) {
        f(m.esu.w_b[h].a.data(), m.esu.w_b[h].a.size(), slot++);
        f(m.esu.w_a[h].a.data(), m.esu.w_a[h].a.size(), slot++);
    }
    for (std::size_t l = 0; l < m.esu.mlp.w.size(); ++l) {
        f(m.esu.mlp.w[l].a.data(), m.esu.mlp.w[l].a.size(), slot++);
        f(m.esu.mlp.b[l].data(), m.esu.mlp.b[l].size(), slot++);
    }
    f(m.esu.no_history_z.data(), m.esu.no_history_z.size(), slot++);
    f(m.esu.no_history_short.data(), m.esu.no_history_short.size(), slot++);
}

template <typename F>
void zip_dense_grads(const ModelGrads& g, F&& f) {
    f(g.gsu_w_b.a.data(), 0);
    f(g.gsu_w_a.a.data(), 1);
    int slot = 2;
    for (std::size_t l = 0; l < g.gsu_aux.w.size(); ++l) {
        f(g.gsu_aux.w[l].a.data(), slot++);
        f(g.gsu_aux.b[l].data(), slot++);
    }
    for (std::size_t h = 0; h < g.esu_w_b.size(); ++h) {
        f(g.esu_w_b[h].a.data(), slot++);
        f(g.esu_w_a[h].a.data(), slot++);
    }
    for (std::size_t l = 0; l < g.esu_mlp.w.size(); ++l) {
        f(g.esu_mlp.w[l].a.data(), slot++);
        f(g.esu_mlp.b[l].data(), slot++);
    }
    f(g.no_hist_z.data(), slot++);
    f(g.no_hist_short.data(), slot++);
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

FrozenSample freeze_sample(const TrainingSample& s, const SimModel& model,
                           std::uint64_t aux_seed) {
    FrozenSample f;
    f.sample = &s;
    if (model.cfg.variant == ModelVariant::kSim) {
        const auto k = static_cast<std::size_t>(model.cfg.sbs_k);
        f.sbs = model.cfg.mode == GsuMode::kHard
                    ? hard_filter(s.long_seq, s.candidate, k)
                    : soft_search_exact(s.long_seq, s.candidate, model, k);
        if (model.cfg.mode == GsuMode::kSoft) {
            const auto cap = static_cast<std::size_t>(model.cfg.aux_sample_max);
            f.aux_seq = s.long_seq.size() > cap
                            ? sample_subsequence(s.long_seq, cap, aux_seed)
                            : s.long_seq;
        }
    }
    return f;
}

LossParts combined_loss_frozen(const FrozenSample& f, const SimModel& model) {
    const TrainingSample& s = *f.sample;
    LossParts parts;
    if (model.cfg.variant == ModelVariant::kAvgPool) {
        AvgPoolCache c;
        parts.esu = cross_entropy(avgpool_forward_cached(s, model, c), s.label);
        parts.total = model.cfg.beta * parts.esu;
        return parts;
    }
    parts.esu = cross_entropy(esu_forward(f.sbs, s.short_seq, s.candidate, model), s.label);
    if (model.cfg.mode == GsuMode::kSoft) {
        parts.gsu = cross_entropy(gsu_aux_forward(f.aux_seq, s.candidate, model).p_click, s.label);
    }
    parts.total = model.cfg.alpha * parts.gsu + model.cfg.beta * parts.esu;
    return parts;
}

LossParts combined_loss(const TrainingSample& s, const SimModel& model) {
    return combined_loss_frozen(freeze_sample(s, model, 0), model);
}

ModelGrads::ModelGrads(const SimModel& m)
    : gsu_w_b(m.gsu.w_b.rows, m.gsu.w_b.cols),
      gsu_w_a(m.gsu.w_a.rows, m.gsu.w_a.cols),
      gsu_aux(m.gsu.aux_mlp),
      esu_mlp(m.esu.mlp),
      no_hist_z(m.esu.no_history_z.size(), 0.0),
      no_hist_short(m.esu.no_history_short.size(), 0.0) {
    for (int h = 0; h < m.esu.heads; ++h) {
        esu_w_b.emplace_back(m.esu.w_b[h].rows, m.esu.w_b[h].cols);
        esu_w_a.emplace_back(m.esu.w_a[h].rows, m.esu.w_a[h].cols);
    }
}

void ModelGrads::clear() {
    item_rows.clear();
    cat_rows.clear();
    time_rows.clear();
    gsu_w_b.fill(0.0);
    gsu_w_a.fill(0.0);
    for (auto& m : gsu_aux.w) m.fill(0.0);
    for (auto& v : gsu_aux.b) v.assign(v.size(), 0.0);
    for (auto& m : esu_w_b) m.fill(0.0);
    for (auto& m : esu_w_a) m.fill(0.0);
    for (auto& m : esu_mlp.w) m.fill(0.0);
    for (auto& v : esu_mlp.b) v.assign(v.size(), 0.0);
    no_hist_z.assign(no_hist_z.size(), 0.0);
    no_hist_short.assign(no_hist_short.size(), 0.0);
}

void ModelGrads::scale(double s) {
    for (auto& [row, v] : item_rows)
        for (auto& x : v) x *= s;
    for (auto& [row, v] : cat_rows)
        for (auto& x : v) x *= s;
    for (auto& [row, v] : time_rows)
        for (auto& x : v) x *= s;
    for (auto& x : gsu_w_b.a) x *= s;
    for (auto& x : gsu_w_a.a) x *= s;
    for (auto& m : gsu_aux.w)
        for (auto& x : m.a) x *= s;
    for (auto& v : gsu_aux.b)
        for (auto& x : v) x *= s;
    for (auto& m : esu_w_b)
        for (auto& x : m.a) x *= s;
    for (auto& m : esu_w_a)
        for (auto& x : m.a) x *= s;
    for (auto& m : esu_mlp.w)
        for (auto& x : m.a) x *= s;
    for (auto& v : esu_mlp.b)
        for (auto& x : v) x *= s;
    for (auto& x : no_hist_z) x *= s;
    for (auto& x : no_hist_short) x *= s;
}

LossParts backward(const FrozenSample& f, const SimModel& model, ModelGrads& g) {
    const TrainingSample& s = *f.sample;
    const ModelConfig& cfg = model.cfg;
    const int d = cfg.embed_dim;
    const double y = static_cast<double>(s.label);
    LossParts parts;

    if (cfg.variant == ModelVariant::kAvgPool) {
        AvgPoolCache c;
        avgpool_forward_cached(s, model, c);
        parts.esu = cross_entropy(c.p, s.label);
        parts.total = cfg.beta * parts.esu;

        const double dl = cfg.beta * (c.p - y);
        const Vec dinput = model.esu.mlp.backward(c.mlp, Vec{-dl, dl}, g.esu_mlp);
        // input layout: [avg_long(d), short(d), e_a(2d)]
        if (c.long_n > 0) {
            const double inv = 1.0 / static_cast<double>(c.long_n);
            for (const auto& b : s.long_seq.behaviors) {
                add_row_grad(g.item_rows, model.item_emb.row_of(b.item_id), dinput.data(), d, inv);
                add_row_grad(g.cat_rows, model.cat_emb.row_of(b.category_id), dinput.data(), d, inv);
            }
        }
        if (c.short_empty) {
            for (int i = 0; i < d; ++i) g.no_hist_short[i] += dinput[d + i];
        } else {
            for (const auto& b : s.short_seq.behaviors) {
                add_row_grad(g.item_rows, model.item_emb.row_of(b.item_id), dinput.data() + d, d);
                add_row_grad(g.cat_rows, model.cat_emb.row_of(b.category_id), dinput.data() + d, d);
            }
        }
        add_row_grad(g.item_rows, model.item_emb.row_of(s.candidate.item_id), dinput.data() + 2 * d, d);
        add_row_grad(g.cat_rows, model.cat_emb.row_of(s.candidate.category_id), dinput.data() + 3 * d, d);
        return parts;
    }

    // --- ESU forward + loss ---
    EsuCache ec;
    esu_forward_cached(f.sbs, s.short_seq, s.candidate, model, ec);
    parts.esu = cross_entropy(ec.p, s.label);

    GsuAuxCache gc;
    const bool soft = cfg.mode == GsuMode::kSoft;
    if (soft) {
        gsu_aux_forward(f.aux_seq, s.candidate, model, &gc);
        parts.gsu = cross_entropy(gc.p, s.label);
    }
    parts.total = cfg.alpha * parts.gsu + cfg.beta * parts.esu;

    // --- ESU backward ---
    const int dz = cfg.z_dim();
    const int heads = cfg.heads;
    {
        const double dl = cfg.beta * (ec.p - y);
        const Vec dinput = model.esu.mlp.backward(ec.mlp, Vec{-dl, dl}, g.esu_mlp);
        // input layout: [u_lt(heads*dz), short(d), e_a(2d)]
        Vec d_ea(2 * d, 0.0);
        for (int i = 0; i < 2 * d; ++i) d_ea[i] = dinput[heads * dz + d + i];

        if (ec.short_empty) {
            for (int i = 0; i < d; ++i) g.no_hist_short[i] += dinput[heads * dz + i];
        } else {
            for (const auto& b : s.short_seq.behaviors) {
                add_row_grad(g.item_rows, model.item_emb.row_of(b.item_id),
                             dinput.data() + heads * dz, d);
                add_row_grad(g.cat_rows, model.cat_emb.row_of(b.category_id),
                             dinput.data() + heads * dz, d);
            }
        }

        const std::size_t n = ec.z.size();
        std::vector<Vec> dz_acc(n, Vec(dz, 0.0));
        Vec g_head(dz), ds(n), dlog(n), dproj(dz);
        for (int h = 0; h < heads; ++h) {
            std::copy(dinput.begin() + static_cast<std::ptrdiff_t>(h) * dz,
                      dinput.begin() + static_cast<std::ptrdiff_t>(h + 1) * dz, g_head.begin());
            const Vec& score = ec.trace.scores[h];
            const auto& proj = ec.attn.proj[h];
            const Vec& q = ec.attn.q[h];

            double sum_s_ds = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                ds[j] = dot(g_head.data(), proj[j].data(), dz);
                sum_s_ds += score[j] * ds[j];
            }
            Vec dq(dz, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                dlog[j] = score[j] * (ds[j] - sum_s_ds);
                for (int i = 0; i < dz; ++i) dproj[i] = score[j] * g_head[i] + dlog[j] * q[i];
                add_outer(g.esu_w_b[h], dproj, ec.z[j]);
                const Vec back = matvec_t(model.esu.w_b[h], dproj);
                axpy(dz_acc[j], back);
                axpy(dq, proj[j], dlog[j]);
            }
            add_outer(g.esu_w_a[h], dq, ec.e_a);
            axpy(d_ea, matvec_t(model.esu.w_a[h], dq));
        }

        if (ec.sbs_empty) {
            axpy(g.no_hist_z, dz_acc[0]);
        } else {
            const int dt = cfg.time_dim_effective();
            for (std::size_t j = 0; j < n; ++j) {
                const Behavior& b = f.sbs[j];
                add_row_grad(g.item_rows, model.item_emb.row_of(b.item_id), dz_acc[j].data(), d);
                add_row_grad(g.cat_rows, model.cat_emb.row_of(b.category_id), dz_acc[j].data(), d);
                if (dt > 0) {
                    const int bucket =
                        bucketize_delta(time_delta_days(b, s.candidate), cfg.buckets);
                    add_row_grad(g.time_rows, model.time_emb.row_of(bucket),
                                 dz_acc[j].data() + d, dt);
                }
            }
        }
        add_row_grad(g.item_rows, model.item_emb.row_of(s.candidate.item_id), d_ea.data(), d);
        add_row_grad(g.cat_rows, model.cat_emb.row_of(s.candidate.category_id), d_ea.data() + d, d);
    }

    // --- GSU auxiliary backward ---
    if (soft && cfg.alpha != 0.0) {
        const double dl = cfg.alpha * (gc.p - y);
        const Vec dinput = model.gsu.aux_mlp.backward(gc.mlp, Vec{-dl, dl}, g.gsu_aux);
        // input layout: [u_r(d), e_a(d)]
        Vec d_ur(dinput.begin(), dinput.begin() + d);
        Vec d_ea(dinput.begin() + d, dinput.begin() + 2 * d);

        const std::size_t n = gc.e.size();
        Vec dv(d, 0.0), du(d);
        for (std::size_t i = 0; i < n; ++i) {
            const double dr = dot(d_ur.data(), gc.e[i].data(), d);
            for (int k = 0; k < d; ++k) du[k] = dr * gc.v[k];
            add_outer(g.gsu_w_b, du, gc.e[i]);
            Vec de = matvec_t(model.gsu.w_b, du);
            axpy(de, d_ur, gc.r[i]);
            const Behavior& b = f.aux_seq[i];
            add_row_grad(g.item_rows, model.item_emb.row_of(b.item_id), de.data(), d);
            add_row_grad(g.cat_rows, model.cat_emb.row_of(b.category_id), de.data(), d);
            axpy(dv, gc.u[i], dr);
        }
        add_outer(g.gsu_w_a, dv, gc.e_a);
        axpy(d_ea, matvec_t(model.gsu.w_a, dv));
        add_row_grad(g.item_rows, model.item_emb.row_of(s.candidate.item_id), d_ea.data(), d);
        add_row_grad(g.cat_rows, model.cat_emb.row_of(s.candidate.category_id), d_ea.data(), d);
    }
    return parts;
}

AdamState::AdamState(SimModel& m) {
    zip_dense(m, [&](double* /*p*/, std::size_t n, int /*slot*/) {
        dense_m.emplace_back(n, 0.0);
        dense_v.emplace_back(n, 0.0);
    });
    for (const auto* tab : {&m.item_emb, &m.cat_emb, &m.time_emb}) {
        table_m.emplace_back(tab->raw().size(), 0.0);
        table_v.emplace_back(tab->raw().size(), 0.0);
    }
}

void adam_step(SimModel& model, const ModelGrads& grads, AdamState& state, double lr) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    std::vector<const double*> gptr;
    zip_dense_grads(grads, [&](const double* p, int /*slot*/) { gptr.push_back(p); });

    int idx = 0;
    zip_dense(model, [&](double* p, std::size_t n, int /*slot*/) {
        Vec& m = state.dense_m[idx];
        Vec& v = state.dense_v[idx];
        const double* gr = gptr[idx];
        ++idx;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gr[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gr[i] * gr[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + state.eps);
        }
    });

    EmbeddingTable* tables[3] = {&model.item_emb, &model.cat_emb, &model.time_emb};
    const std::map<std::int64_t, Vec>* row_grads[3] = {&grads.item_rows, &grads.cat_rows,
                                                       &grads.time_rows};
    for (int t = 0; t < 3; ++t) {
        const int dim = tables[t]->dim();
        Vec& m = state.table_m[t];
        Vec& v = state.table_v[t];
        double* data = tables[t]->raw().data();
        for (const auto& [row, gvec] : *row_grads[t]) {
            const std::size_t off = static_cast<std::size_t>(row) * dim;
            for (int i = 0; i < dim; ++i) {
                const double gi = gvec[i];
                m[off + i] = state.beta1 * m[off + i] + (1.0 - state.beta1) * gi;
                v[off + i] = state.beta2 * v[off + i] + (1.0 - state.beta2) * gi * gi;
                data[off + i] -= lr * (m[off + i] / bc1) / (std::sqrt(v[off + i] / bc2) + state.eps);
            }
        }
    }
}

double predict_ctr(const TrainingSample& s, const SimModel& model) {
    if (model.cfg.variant == ModelVariant::kAvgPool) {
        AvgPoolCache c;
        return avgpool_forward_cached(s, model, c);
    }
    const auto k = static_cast<std::size_t>(model.cfg.sbs_k);
    const BehaviorSequence sbs = model.cfg.mode == GsuMode::kHard
                                     ? hard_filter(s.long_seq, s.candidate, k)
                                     : soft_search_exact(s.long_seq, s.candidate, model, k);
    return esu_forward(sbs, s.short_seq, s.candidate, model);
}

TrainResult train(const std::vector<TrainingSample>& data, SimModel& model,
                  const TrainOptions& opts) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (opts.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    model.cfg.validate();

    const std::size_t n = data.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng split_rng(mix_seed(opts.seed, 0x5A17));
    shuffle_indices(idx, split_rng);
    std::size_t holdout = static_cast<std::size_t>(opts.holdout_frac * static_cast<double>(n));
    if (holdout >= n) holdout = n - 1;
    const std::size_t train_n = n - holdout;
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + train_n);
    std::vector<std::size_t> hold_idx(idx.begin() + train_n, idx.end());

    TrainResult result;
    result.train_count = train_n;
    result.holdout_count = holdout;

    std::vector<FrozenSample> frozen(train_n);
    const bool soft = model.cfg.variant == ModelVariant::kSim && model.cfg.mode == GsuMode::kSoft;

    AdamState adam(model);
    ModelGrads grads(model);

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        // Selection is static in hard mode; soft mode re-searches with the
        // newest embeddings at every epoch boundary.
        if (epoch == 0 || soft) {
            for (std::size_t i = 0; i < train_n; ++i) {
                frozen[i] = freeze_sample(data[train_idx[i]], model,
                                          mix_seed(mix_seed(opts.seed, epoch), i));
            }
        }
        const double lr = lr_schedule(model.cfg, epoch);

        std::vector<std::size_t> order(train_n);
        std::iota(order.begin(), order.end(), 0);
        Rng epoch_rng(mix_seed(opts.seed, 1000 + epoch));
        shuffle_indices(order, epoch_rng);

        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < train_n) {
            const std::size_t end = std::min(pos + static_cast<std::size_t>(opts.batch_size), train_n);
            grads.clear();
            for (std::size_t i = pos; i < end; ++i) {
                loss_sum += backward(frozen[order[i]], model, grads).total;
            }
            grads.scale(1.0 / static_cast<double>(end - pos));
            adam_step(model, grads, adam, lr);
            pos = end;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.mean_loss = loss_sum / static_cast<double>(train_n);
        if (!hold_idx.empty()) {
            std::vector<double> scores;
            std::vector<int> labels;
            scores.reserve(hold_idx.size());
            for (std::size_t i : hold_idx) {
                scores.push_back(predict_ctr(data[i], model));
                labels.push_back(data[i].label);
            }
            const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
            const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
            if (has_pos && has_neg) em.holdout_auc = auc(scores, labels);
        }
        result.epochs.push_back(em);
    }
    return result;
}

}  // namespace sim
