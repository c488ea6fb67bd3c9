#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sim {

constexpr double kSecondsPerDay = 86400.0;

// One timestamped user interaction.
struct Behavior {
    std::int64_t item_id = 0;
    std::int64_t category_id = 0;
    std::int64_t timestamp = 0;  // seconds since epoch

    bool operator==(const Behavior&) const = default;
};

// Ordered list of behaviors, ascending timestamp.
struct BehaviorSequence {
    std::vector<Behavior> behaviors;

    BehaviorSequence() = default;
    explicit BehaviorSequence(std::vector<Behavior> b) : behaviors(std::move(b)) {}

    std::size_t size() const { return behaviors.size(); }
    bool empty() const { return behaviors.empty(); }
    const Behavior& operator[](std::size_t i) const { return behaviors[i]; }

    bool is_time_ordered() const {
        for (std::size_t i = 1; i < behaviors.size(); ++i) {
            if (behaviors[i].timestamp < behaviors[i - 1].timestamp) return false;
        }
        return true;
    }
};

// Target item to be scored, with the request time it is scored at.
struct CandidateItem {
    std::int64_t item_id = 0;
    std::int64_t category_id = 0;
    std::int64_t request_time = 0;
};

// One labeled impression: candidate plus the user's history split into the
// recent short window and the long-term remainder.
struct TrainingSample {
    std::int64_t user_id = 0;
    CandidateItem candidate;
    int label = 0;  // {0,1}
    BehaviorSequence short_seq;
    BehaviorSequence long_seq;
};

// Ascending day-valued boundaries for time-interval discretization.
// Deltas map to the index of the first boundary strictly greater than the
// delta; anything past the last boundary lands in the overflow bucket.
struct TimeDeltaBuckets {
    std::vector<double> boundaries;

    TimeDeltaBuckets() = default;
    explicit TimeDeltaBuckets(std::vector<double> b) : boundaries(std::move(b)) {
        validate();
    }

    // Powers of two in days, covering a 180-day window at log resolution.
    static TimeDeltaBuckets defaults() {
        return TimeDeltaBuckets({1, 2, 4, 8, 16, 32, 64, 128, 256});
    }

    int bucket_count() const { return static_cast<int>(boundaries.size()) + 1; }

    void validate() const {
        if (boundaries.empty())
            throw std::invalid_argument("TimeDeltaBuckets: boundary list is empty");
        if (boundaries.front() <= 0.0)
            throw std::invalid_argument("TimeDeltaBuckets: first boundary must be > 0");
        for (std::size_t i = 1; i < boundaries.size(); ++i) {
            if (boundaries[i] <= boundaries[i - 1])
                throw std::invalid_argument("TimeDeltaBuckets: boundaries must be strictly increasing");
        }
    }
};

// Splits into (long part, short part): the short part is the most recent
// `short_len` behaviors, the long part everything earlier. Concatenating
// long + short reconstructs the input.
inline std::pair<BehaviorSequence, BehaviorSequence> split_short_long(
        const BehaviorSequence& seq, std::size_t short_len) {
    const std::size_t n = seq.size();
    const std::size_t cut = n > short_len ? n - short_len : 0;
    BehaviorSequence long_part, short_part;
    long_part.behaviors.assign(seq.behaviors.begin(), seq.behaviors.begin() + cut);
    short_part.behaviors.assign(seq.behaviors.begin() + cut, seq.behaviors.end());
    return {std::move(long_part), std::move(short_part)};
}

// Days between a behavior and the candidate's request time.
inline double time_delta_days(const Behavior& b, const CandidateItem& cand) {
    if (b.timestamp > cand.request_time)
        throw std::invalid_argument("time_delta_days: behavior is newer than the request");
    return static_cast<double>(cand.request_time - b.timestamp) / kSecondsPerDay;
}

// Index of the first boundary exceeding `delta`; overflow bucket past the end.
inline int bucketize_delta(double delta, const TimeDeltaBuckets& buckets) {
    buckets.validate();
    if (delta < 0.0)
        throw std::invalid_argument("bucketize_delta: negative delta");
    int idx = 0;
    for (double bound : buckets.boundaries) {
        if (delta < bound) return idx;
        ++idx;
    }
    return idx;  // overflow bucket
}

}  // namespace sim
