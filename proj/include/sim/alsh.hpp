#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sim/mat.hpp"

namespace sim {

// Asymmetric LSH for maximum inner product search. Corpus vectors are scaled
// so the largest norm becomes U < 1 and augmented with m squared-norm powers
// P(x) = [s x; ||s x||^2; ||s x||^4; ...; ||s x||^(2^m)]; queries are
// normalized and padded with 1/2 entries, which turns MIPS into L2 nearest
// neighbor on the transformed space. Buckets come from p-stable L2 hashes,
// `hashes_per_table` of them concatenated per table, with query-directed
// multiprobe on neighboring buckets.
struct AlshConfig {
    int m = 3;                     // augmentation order
    double scaling_u = 0.83;       // norm budget after scaling
    int tables = 32;               // L
    int hashes_per_table = 12;     // concatenated hashes forming one bucket key
    double bucket_width = 2.5;     // w in floor((a.v + b)/w)
    int probes_per_table = 48;     // multiprobe budget per table (incl. home bucket)
    std::size_t exact_scan_threshold = 128;
    std::uint64_t seed = 0x51u;

    void validate() const;
};

struct AlshQueryStats {
    std::size_t candidates = 0;      // distinct vectors rescored
    std::size_t buckets_probed = 0;
    bool exact_fallback = false;
};

class AlshIndex {
public:
    static AlshIndex build(const std::vector<std::pair<std::int64_t, Vec>>& vectors,
                           const AlshConfig& cfg);

    // Top-k ids by exact inner product among bucket-probe candidates,
    // descending score. Falls back to a full scan on tiny corpora.
    std::vector<std::pair<std::int64_t, double>> query(const Vec& q, std::size_t k,
                                                       AlshQueryStats* stats = nullptr) const;

    std::size_t size() const { return ids_.size(); }
    int dim() const { return dim_; }
    const AlshConfig& config() const { return cfg_; }
    double max_norm() const { return max_norm_; }

    // Transformed vector for one corpus entry (exposed for invariant tests).
    Vec transformed(std::size_t index) const;

private:
    AlshConfig cfg_;
    int dim_ = 0;
    double max_norm_ = 0.0;
    std::vector<std::int64_t> ids_;
    std::vector<double> data_;  // row-major raw vectors

    struct Table {
        std::vector<double> a;       // hashes_per_table x (dim + m), row-major
        std::vector<double> offset;  // hashes_per_table
        std::unordered_map<std::uint64_t, std::vector<std::int32_t>> buckets;
    };
    std::vector<Table> tables_;

    Vec transform_point(const double* x) const;
    Vec transform_query(const Vec& q) const;
    std::vector<std::pair<std::int64_t, double>> exact_scan(const Vec& q, std::size_t k) const;
};

}  // namespace sim
