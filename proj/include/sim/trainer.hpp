#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "sim/model.hpp"

namespace sim {

struct LossParts {
    double total = 0.0;
    double gsu = 0.0;  // auxiliary loss, unweighted (0 in hard mode)
    double esu = 0.0;  // CTR loss, unweighted
};

// One sample with its stage-one selection pinned. Gradients and finite
// differences are taken with the discrete search output held fixed, which is
// the function each optimizer step actually descends.
struct FrozenSample {
    const TrainingSample* sample = nullptr;
    BehaviorSequence sbs;      // ESU input (empty for avg-pool variant)
    BehaviorSequence aux_seq;  // GSU aux input (soft mode only)
};

FrozenSample freeze_sample(const TrainingSample& s, const SimModel& model,
                           std::uint64_t aux_seed);

// Runs stage-one search with current parameters, then the full forward.
LossParts combined_loss(const TrainingSample& s, const SimModel& model);

// Forward on a pinned selection.
LossParts combined_loss_frozen(const FrozenSample& f, const SimModel& model);

// Sparse-by-row embedding gradients plus dense gradients for everything else.
struct ModelGrads {
    std::map<std::int64_t, Vec> item_rows, cat_rows, time_rows;  // keyed by table row
    Mat gsu_w_b, gsu_w_a;
    Mlp::Grads gsu_aux;
    std::vector<Mat> esu_w_b, esu_w_a;
    Mlp::Grads esu_mlp;
    Vec no_hist_z, no_hist_short;

    explicit ModelGrads(const SimModel& m);
    void clear();
    void scale(double s);
};

// Exact analytic gradients of combined_loss_frozen; accumulates into `g`.
LossParts backward(const FrozenSample& f, const SimModel& model, ModelGrads& g);

// Adam with bias correction. Embedding-table moments are updated lazily:
// only rows with a gradient entry move.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;

    std::vector<Vec> dense_m, dense_v;         // aligned with non-table dense params
    std::vector<Vec> table_m, table_v;         // full-size per table {item, cat, time}

    explicit AdamState(SimModel& m);
};

void adam_step(SimModel& model, const ModelGrads& grads, AdamState& state, double lr);

// One bias-corrected Adam update for a single scalar (the exact formula
// adam_step applies element-wise).
inline double adam_update_scalar(double& m, double& v, double g, std::int64_t step, double lr,
                                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(step)));
    const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(step)));
    return -lr * m_hat / (std::sqrt(v_hat) + eps);
}

// lr0 * decay^epoch.
inline double lr_schedule(const ModelConfig& cfg, int epoch) {
    double lr = cfg.lr0;
    for (int i = 0; i < epoch; ++i) lr *= cfg.lr_decay;
    return lr;
}

// CTR prediction with fresh stage-one search (the serving-path forward).
double predict_ctr(const TrainingSample& s, const SimModel& model);

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> holdout_auc;
};

struct TrainOptions {
    int epochs = 3;
    std::uint64_t seed = 1;
    double holdout_frac = 0.2;
    int batch_size = 128;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    std::size_t train_count = 0;
    std::size_t holdout_count = 0;
};

// Mini-batch Adam over the dataset. Deterministic under fixed seed: fixed
// shuffle streams, fixed reduction order, single-threaded math. In soft mode
// the per-sample Top-K selection is refreshed from current embeddings at the
// start of every epoch.
TrainResult train(const std::vector<TrainingSample>& data, SimModel& model,
                  const TrainOptions& opts);

}  // namespace sim
