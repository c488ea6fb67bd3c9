#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sim/types.hpp"

namespace sim {

// Synthetic corpus with a planted long-term interest signal: every user has
// hidden affinity categories that dominate their behavior stream, and click
// labels depend on how many long-term behaviors share the candidate's
// category, so category-filtered history is predictive by construction.
struct GenConfig {
    std::uint64_t users = 10000;
    std::int64_t items = 50000;
    std::int64_t categories = 100;
    double len_log_mu = 4.60517018598809;  // ln 100
    double len_log_sigma = 0.4;
    std::uint64_t len_min = 20;
    std::uint64_t len_max = 500;       // configurable up to 54000
    int affinity_per_user = 3;
    double affinity_prob = 0.7;        // behavior drawn from an affinity category
    double label_w = 1.5;
    double label_b = -2.0;
    double noise = 0.1;                // label flip probability
    int samples_per_user = 2;
    double cand_affinity_frac = 0.12;  // candidate from an affinity category
    double cand_history_frac = 0.25;   // candidate from a long-history category
    int short_len = 10;
    int horizon_days = 180;
    std::uint64_t seed = 1;

    void validate() const;
};

// One line of a sample file: candidate + label at a request time.
struct RawSample {
    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    std::int64_t category_id = 0;
    std::int64_t request_time = 0;
    int label = 0;
};

struct GenOutput {
    std::vector<std::pair<std::int64_t, Behavior>> behaviors;  // time-ascending per user
    std::vector<RawSample> samples;
};

GenOutput generate(const GenConfig& cfg);

// Joins sample records with per-user histories (behaviors strictly before the
// request time), split into short/long parts. Throws if any sample would see
// a future behavior.
std::vector<TrainingSample> assemble_samples(
    const std::vector<std::pair<std::int64_t, Behavior>>& behaviors,
    const std::vector<RawSample>& samples, int short_len);

// Count of long-term behaviors sharing the candidate's category (the label
// driver; exposed for the counting oracle).
int n_match(const TrainingSample& s);

// Log formats: user<TAB>item<TAB>category<TAB>timestamp, plus a label column
// for sample files.
void write_behaviors_tsv(const std::string& path,
                         const std::vector<std::pair<std::int64_t, Behavior>>& behaviors);
void write_samples_tsv(const std::string& path, const std::vector<RawSample>& samples);
std::vector<std::pair<std::int64_t, Behavior>> load_behaviors_tsv(const std::string& path);
std::vector<RawSample> load_samples_tsv(const std::string& path);

struct IngestStats {
    std::uint64_t lines = 0;
    std::uint64_t rejected = 0;
    std::uint64_t out_of_order = 0;  // lines that arrived before an earlier timestamp
    std::uint64_t users = 0;
    std::uint64_t items = 0;
    std::uint64_t categories = 0;
};

struct IngestOutput {
    std::vector<std::pair<std::int64_t, Behavior>> behaviors;
    std::vector<RawSample> samples;
    IngestStats stats;
    // raw id -> dense id dictionaries, first-seen order
    std::map<std::int64_t, std::int64_t> user_dict, item_dict, cat_dict;
};

enum class IngestSchema { kReviews, kClicks };

// Reviews: 4 columns, every line is a behavior; each user's final behavior
// becomes a label-1 sample. Clicks: 5 columns, every line is a labeled
// sample and clicked lines double as behaviors. Ids are remapped to dense
// integers; per-user sequences are time-sorted regardless of line order.
IngestOutput ingest_tsv(const std::string& path, IngestSchema schema);

}  // namespace sim
