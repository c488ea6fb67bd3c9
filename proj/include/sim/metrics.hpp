#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim/types.hpp"

namespace sim {

struct SimModel;

struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rank-statistic AUC: probability a random positive outranks a random
// negative, ties counted 1/2. Throws if only one class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Whole days between a click and the user's most recent earlier behavior in
// the same category; -1 if the user never touched that category before.
int d_category(const TrainingSample& click);

struct HistogramBin {
    std::string label;
    std::int64_t lo = 0;  // inclusive; ignored for the -1 bin
    std::int64_t hi = 0;  // exclusive
    std::uint64_t count = 0;
};

struct DCategoryHistogram {
    std::vector<HistogramBin> bins;  // bins[0] is the d = -1 bin
    std::uint64_t total = 0;
};

// Short-term clicks (d <= boundary) bucketed at short_bucket_days width,
// long-term ones at long_bucket_days; d = -1 gets its own bin.
DCategoryHistogram d_category_distribution(const std::vector<int>& d_values,
                                           int short_bucket_days = 2, int long_bucket_days = 20,
                                           int boundary = 14);

struct EvalReport {
    double auc = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t clicks = 0;
    double mean_d_category = 0.0;  // over clicks with d > -1
    double p_d_gt_neg1 = 0.0;
    DCategoryHistogram histogram;
};

// Scores every sample with the model and assembles the offline report.
EvalReport evaluate(const std::vector<TrainingSample>& samples, const SimModel& model);

struct ModelComparison {
    EvalReport a, b;
    double delta_auc = 0.0;
    double delta_mean_d_category = 0.0;
    double delta_p_d_gt_neg1 = 0.0;
    // Mean d_category over each model's top-decile-scored clicked samples.
    double top_decile_mean_d_a = 0.0;
    double top_decile_mean_d_b = 0.0;
};

ModelComparison compare_models(const std::vector<TrainingSample>& samples, const SimModel& a,
                               const SimModel& b);

}  // namespace sim
