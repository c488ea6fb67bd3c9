#include "sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sim/trainer.hpp"

namespace sim {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) pos += (l == 1);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0)
        throw UndefinedMetricError("auc: both classes must be present");

    // Average ranks (ties share the mean rank), then the Mann-Whitney form.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mean_rank;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] == 1) rank_sum_pos += rank[k];
    const double p = static_cast<double>(pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

int d_category(const TrainingSample& click) {
    if (click.label != 1) throw std::invalid_argument("d_category: sample is not a click");
    const std::int64_t cat = click.candidate.category_id;
    const std::int64_t t = click.candidate.request_time;
    std::int64_t best = -1;
    // Short sequence holds the most recent behaviors; scan it backwards first.
    for (auto it = click.short_seq.behaviors.rbegin(); it != click.short_seq.behaviors.rend(); ++it) {
        if (it->category_id == cat) {
            best = it->timestamp;
            break;
        }
    }
    if (best < 0) {
        for (auto it = click.long_seq.behaviors.rbegin(); it != click.long_seq.behaviors.rend(); ++it) {
            if (it->category_id == cat) {
                best = it->timestamp;
                break;
            }
        }
    }
    if (best < 0) return -1;
    return static_cast<int>((t - best) / static_cast<std::int64_t>(kSecondsPerDay));
}

DCategoryHistogram d_category_distribution(const std::vector<int>& d_values,
                                           int short_bucket_days, int long_bucket_days,
                                           int boundary) {
    if (d_values.empty())
        throw std::invalid_argument("d_category_distribution: no clicks");
    DCategoryHistogram h;
    h.total = d_values.size();

    int max_d = -1;
    for (int d : d_values) max_d = std::max(max_d, d);

    const int short_bins = boundary / short_bucket_days + 1;  // covers [0, boundary]
    int long_bins = 0;
    if (max_d > boundary)
        long_bins = (max_d - boundary - 1) / long_bucket_days + 1;

    h.bins.push_back({"none", -1, 0, 0});
    for (int b = 0; b < short_bins; ++b) {
        const std::int64_t lo = static_cast<std::int64_t>(b) * short_bucket_days;
        const std::int64_t hi = lo + short_bucket_days;
        h.bins.push_back({"[" + std::to_string(lo) + "," + std::to_string(hi) + ")", lo, hi, 0});
    }
    for (int b = 0; b < long_bins; ++b) {
        const std::int64_t lo = boundary + 1 + static_cast<std::int64_t>(b) * long_bucket_days;
        const std::int64_t hi = lo + long_bucket_days;
        h.bins.push_back({"[" + std::to_string(lo) + "," + std::to_string(hi) + ")", lo, hi, 0});
    }

    for (int d : d_values) {
        std::size_t bin;
        if (d < 0) {
            bin = 0;
        } else if (d <= boundary) {
            bin = 1 + static_cast<std::size_t>(d / short_bucket_days);
        } else {
            bin = 1 + static_cast<std::size_t>(short_bins) +
                  static_cast<std::size_t>((d - boundary - 1) / long_bucket_days);
        }
        h.bins[bin].count += 1;
    }
    return h;
}

EvalReport evaluate(const std::vector<TrainingSample>& samples, const SimModel& model) {
    EvalReport rep;
    rep.samples = samples.size();
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(samples.size());
    std::vector<int> ds;
    for (const auto& s : samples) {
        scores.push_back(predict_ctr(s, model));
        labels.push_back(s.label);
        if (s.label == 1) ds.push_back(d_category(s));
    }
    rep.auc = auc(scores, labels);
    rep.clicks = ds.size();
    if (!ds.empty()) {
        std::uint64_t with_history = 0;
        double sum = 0.0;
        for (int d : ds) {
            if (d > -1) {
                ++with_history;
                sum += d;
            }
        }
        rep.p_d_gt_neg1 = static_cast<double>(with_history) / static_cast<double>(ds.size());
        rep.mean_d_category = with_history > 0 ? sum / static_cast<double>(with_history) : 0.0;
        rep.histogram = d_category_distribution(ds);
    }
    return rep;
}

// Mean d_category (excluding -1) over the top 10% of clicked samples as
// ranked by this model's scores.
static double top_decile_mean_d(const std::vector<TrainingSample>& samples,
                                const std::vector<double>& scores) {
    std::vector<std::size_t> clicks;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].label == 1) clicks.push_back(i);
    if (clicks.empty()) return 0.0;
    std::sort(clicks.begin(), clicks.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    const std::size_t take = std::max<std::size_t>(1, clicks.size() / 10);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < take; ++i) {
        const int d = d_category(samples[clicks[i]]);
        if (d > -1) {
            sum += d;
            ++counted;
        }
    }
    return counted > 0 ? sum / static_cast<double>(counted) : 0.0;
}

ModelComparison compare_models(const std::vector<TrainingSample>& samples, const SimModel& a,
                               const SimModel& b) {
    ModelComparison cmp;
    cmp.a = evaluate(samples, a);
    cmp.b = evaluate(samples, b);
    cmp.delta_auc = cmp.b.auc - cmp.a.auc;
    cmp.delta_mean_d_category = cmp.b.mean_d_category - cmp.a.mean_d_category;
    cmp.delta_p_d_gt_neg1 = cmp.b.p_d_gt_neg1 - cmp.a.p_d_gt_neg1;

    std::vector<double> scores_a, scores_b;
    scores_a.reserve(samples.size());
    scores_b.reserve(samples.size());
    for (const auto& s : samples) {
        scores_a.push_back(predict_ctr(s, a));
        scores_b.push_back(predict_ctr(s, b));
    }
    cmp.top_decile_mean_d_a = top_decile_mean_d(samples, scores_a);
    cmp.top_decile_mean_d_b = top_decile_mean_d(samples, scores_b);
    return cmp;
}

}  // namespace sim
