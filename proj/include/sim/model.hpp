#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim/embedding.hpp"
#include "sim/esu.hpp"
#include "sim/gsu.hpp"
#include "sim/types.hpp"

namespace sim {

enum class GsuMode { kHard, kSoft };

// kSim runs the two-stage search + attention path; kAvgPool is the
// no-search baseline that mean-pools the whole long sequence.
enum class ModelVariant { kSim, kAvgPool };

struct ModelConfig {
    int embed_dim = 4;
    int time_dim = 4;
    bool use_time = true;
    int heads = 4;
    int sbs_k = 200;         // GSU output truncation
    int short_len = 10;      // short/long split length
    GsuMode mode = GsuMode::kHard;
    ModelVariant variant = ModelVariant::kSim;
    double alpha = 0.0;      // GSU loss weight (0 in hard mode)
    double beta = 1.0;       // ESU loss weight
    double lr0 = 0.001;
    double lr_decay = 0.9;
    int aux_sample_max = 200;  // subsequence cap before the aux task
    std::int64_t item_vocab = 0;
    std::int64_t cat_vocab = 0;
    std::uint64_t init_seed = 1;
    double init_scale = 0.1;
    TimeDeltaBuckets buckets = TimeDeltaBuckets::defaults();

    int time_dim_effective() const { return use_time ? time_dim : 0; }
    int z_dim() const { return embed_dim + time_dim_effective(); }
    int esu_input_dim() const {
        const int cand = 2 * embed_dim;
        if (variant == ModelVariant::kAvgPool) return embed_dim + embed_dim + cand;
        return heads * z_dim() + embed_dim + cand;
    }
    int aux_input_dim() const { return 2 * embed_dim; }

    void validate() const;
};

// Named view of one dense parameter block (for Adam, gradient checks and
// checkpointing). Pointers stay valid for the lifetime of the model.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};

// All learnable state. In soft mode GSU and ESU read the same embedding
// tables by construction; there is exactly one copy of each table here.
struct SimModel {
    ModelConfig cfg;
    EmbeddingTable item_emb;
    EmbeddingTable cat_emb;
    EmbeddingTable time_emb;
    GsuParams gsu;
    EsuParams esu;

    static SimModel init(const ModelConfig& cfg);

    std::vector<TensorRef> dense_params();
    std::vector<TensorRef> dense_params() const;  // const view (data is non-owning)

    void save_checkpoint(const std::string& path) const;
    static SimModel load_checkpoint(const std::string& path);
};

// d-dimensional behavior representation: item embedding + category embedding.
inline Vec behavior_embedding(const SimModel& m, const Behavior& b) {
    const int d = m.cfg.embed_dim;
    Vec e(d);
    const double* item = m.item_emb.lookup(b.item_id);
    const double* cat = m.cat_emb.lookup(b.category_id);
    for (int i = 0; i < d; ++i) e[i] = item[i] + cat[i];
    return e;
}

// GSU-side candidate representation (same d-dimensional form as behaviors).
inline Vec gsu_candidate_embedding(const SimModel& m, const CandidateItem& cand) {
    const int d = m.cfg.embed_dim;
    Vec e(d);
    const double* item = m.item_emb.lookup(cand.item_id);
    const double* cat = m.cat_emb.lookup(cand.category_id);
    for (int i = 0; i < d; ++i) e[i] = item[i] + cat[i];
    return e;
}

// ESU-side candidate representation: concat(item, category), dimension 2d.
inline Vec esu_candidate_embedding(const SimModel& m, const CandidateItem& cand) {
    const int d = m.cfg.embed_dim;
    Vec e(2 * d);
    const double* item = m.item_emb.lookup(cand.item_id);
    const double* cat = m.cat_emb.lookup(cand.category_id);
    for (int i = 0; i < d; ++i) {
        e[i] = item[i];
        e[d + i] = cat[i];
    }
    return e;
}

const char* to_string(GsuMode m);
const char* to_string(ModelVariant v);
GsuMode gsu_mode_from_string(const std::string& s);
ModelVariant variant_from_string(const std::string& s);

}  // namespace sim
