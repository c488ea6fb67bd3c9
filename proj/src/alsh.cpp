#include "sim/alsh.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "sim/io.hpp"
#include "sim/rng.hpp"

namespace sim {

void AlshConfig::validate() const {
    if (m < 1) throw std::invalid_argument("alsh: m must be >= 1");
    if (!(scaling_u > 0.0 && scaling_u < 1.0))
        throw std::invalid_argument("alsh: U must be in (0,1)");
    if (tables < 1 || hashes_per_table < 1)
        throw std::invalid_argument("alsh: tables and hashes_per_table must be >= 1");
    if (bucket_width <= 0.0) throw std::invalid_argument("alsh: bucket_width must be > 0");
    if (probes_per_table < 1) throw std::invalid_argument("alsh: probes_per_table must be >= 1");
}

namespace {

std::uint64_t bucket_key(const std::vector<std::int32_t>& h) {
    Fnv1a64 f;
    f.update(h.data(), h.size() * sizeof(std::int32_t));
    return f.digest();
}

}  // namespace

Vec AlshIndex::transform_point(const double* x) const {
    const double s = cfg_.scaling_u / max_norm_;
    Vec t(static_cast<std::size_t>(dim_) + cfg_.m);
    double norm_sq = 0.0;
    for (int i = 0; i < dim_; ++i) {
        t[i] = s * x[i];
        norm_sq += t[i] * t[i];
    }
    double power = norm_sq;  // ||x'||^2, then ^4, ^8, ...
    for (int j = 0; j < cfg_.m; ++j) {
        t[dim_ + j] = power;
        power *= power;
    }
    return t;
}

Vec AlshIndex::transform_query(const Vec& q) const {
    Vec t(static_cast<std::size_t>(dim_) + cfg_.m, 0.5);
    const double norm = l2_norm(q);
    for (int i = 0; i < dim_; ++i) t[i] = q[i] / norm;
    return t;
}

AlshIndex AlshIndex::build(const std::vector<std::pair<std::int64_t, Vec>>& vectors,
                           const AlshConfig& cfg) {
    cfg.validate();
    if (vectors.empty()) throw std::invalid_argument("alsh build: empty corpus");
    AlshIndex idx;
    idx.cfg_ = cfg;
    idx.dim_ = static_cast<int>(vectors.front().second.size());

    idx.ids_.reserve(vectors.size());
    idx.data_.reserve(vectors.size() * idx.dim_);
    double max_norm = 0.0;
    for (const auto& [id, v] : vectors) {
        if (static_cast<int>(v.size()) != idx.dim_)
            throw std::invalid_argument("alsh build: non-uniform vector dimension");
        idx.ids_.push_back(id);
        idx.data_.insert(idx.data_.end(), v.begin(), v.end());
        max_norm = std::max(max_norm, l2_norm(v));
    }
    if (max_norm <= 0.0)
        throw std::invalid_argument("alsh build: corpus max norm is zero");
    idx.max_norm_ = max_norm;

    const int td = idx.dim_ + cfg.m;
    Rng rng(cfg.seed);
    idx.tables_.resize(cfg.tables);
    for (auto& table : idx.tables_) {
        table.a.resize(static_cast<std::size_t>(cfg.hashes_per_table) * td);
        for (auto& x : table.a) x = rng.normal();
        table.offset.resize(cfg.hashes_per_table);
        for (auto& x : table.offset) x = rng.uniform() * cfg.bucket_width;
    }

    std::vector<std::int32_t> h(cfg.hashes_per_table);
    for (std::size_t i = 0; i < idx.ids_.size(); ++i) {
        const Vec t = idx.transform_point(idx.data_.data() + i * idx.dim_);
        for (auto& table : idx.tables_) {
            for (int j = 0; j < cfg.hashes_per_table; ++j) {
                const double proj =
                    dot(table.a.data() + static_cast<std::size_t>(j) * td, t.data(), td);
                h[j] = static_cast<std::int32_t>(
                    std::floor((proj + table.offset[j]) / cfg.bucket_width));
            }
            table.buckets[bucket_key(h)].push_back(static_cast<std::int32_t>(i));
        }
    }
    return idx;
}

Vec AlshIndex::transformed(std::size_t index) const {
    return transform_point(data_.data() + index * dim_);
}

std::vector<std::pair<std::int64_t, double>> AlshIndex::exact_scan(const Vec& q,
                                                                   std::size_t k) const {
    std::vector<std::pair<std::int64_t, double>> scored;
    scored.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i)
        scored.emplace_back(ids_[i], dot(q.data(), data_.data() + i * dim_, dim_));
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    scored.resize(take);
    return scored;
}

namespace {

// Query-directed multiprobe: perturbation sets over the per-hash bucket
// coordinates, emitted in increasing expected-distance order (Lv et al.).
struct ProbeSet {
    double score;
    std::vector<int> members;  // indices into the sorted perturbation list
    bool operator>(const ProbeSet& other) const { return score > other.score; }
};

struct Perturbation {
    int coord;
    int delta;  // +1 or -1
    double score;
};

}  // namespace

std::vector<std::pair<std::int64_t, double>> AlshIndex::query(const Vec& q, std::size_t k,
                                                              AlshQueryStats* stats) const {
    if (static_cast<int>(q.size()) != dim_)
        throw std::invalid_argument("alsh query: dimension mismatch");
    if (stats) *stats = {};
    const double qnorm = l2_norm(q);
    if (ids_.size() <= cfg_.exact_scan_threshold || qnorm == 0.0) {
        if (stats) {
            stats->exact_fallback = true;
            stats->candidates = ids_.size();
        }
        return exact_scan(q, k);
    }

    const int nh = cfg_.hashes_per_table;
    const int td = dim_ + cfg_.m;
    const Vec tq = transform_query(q);

    std::vector<char> seen(ids_.size(), 0);
    std::vector<std::int32_t> candidates;
    std::vector<std::int32_t> home(nh);
    std::vector<double> frac(nh);
    std::vector<std::int32_t> probe_h(nh);

    for (const auto& table : tables_) {
        for (int j = 0; j < nh; ++j) {
            const double pos =
                (dot(table.a.data() + static_cast<std::size_t>(j) * td, tq.data(), td) +
                 table.offset[j]) /
                cfg_.bucket_width;
            const double fl = std::floor(pos);
            home[j] = static_cast<std::int32_t>(fl);
            frac[j] = pos - fl;
        }

        // Perturbations sorted by expected squared distance to the boundary.
        std::vector<Perturbation> perts;
        perts.reserve(2 * nh);
        for (int j = 0; j < nh; ++j) {
            const double up = (1.0 - frac[j]) * cfg_.bucket_width;
            const double down = frac[j] * cfg_.bucket_width;
            perts.push_back({j, +1, up * up});
            perts.push_back({j, -1, down * down});
        }
        std::sort(perts.begin(), perts.end(),
                  [](const Perturbation& a, const Perturbation& b) { return a.score < b.score; });

        auto probe_bucket = [&](const std::vector<int>& members) {
            std::copy(home.begin(), home.end(), probe_h.begin());
            for (int mi : members) {
                const auto& p = perts[mi];
                probe_h[p.coord] += p.delta;
            }
            auto it = table.buckets.find(bucket_key(probe_h));
            if (stats) stats->buckets_probed += 1;
            if (it == table.buckets.end()) return;
            for (std::int32_t i : it->second) {
                if (!seen[i]) {
                    seen[i] = 1;
                    candidates.push_back(i);
                }
            }
        };

        probe_bucket({});  // home bucket
        int emitted = 1;

        std::priority_queue<ProbeSet, std::vector<ProbeSet>, std::greater<ProbeSet>> heap;
        if (!perts.empty()) heap.push({perts[0].score, {0}});
        while (emitted < cfg_.probes_per_table && !heap.empty()) {
            ProbeSet top = heap.top();
            heap.pop();
            // Validity: a set must not perturb the same coordinate twice.
            bool valid = true;
            {
                std::vector<char> used(nh, 0);
                for (int mi : top.members) {
                    if (used[perts[mi].coord]) {
                        valid = false;
                        break;
                    }
                    used[perts[mi].coord] = 1;
                }
            }
            if (valid) {
                probe_bucket(top.members);
                ++emitted;
            }
            const int last = top.members.back();
            if (last + 1 < static_cast<int>(perts.size())) {
                // shift: move the deepest member one step down the sorted list
                ProbeSet shifted = top;
                shifted.score = top.score - perts[last].score + perts[last + 1].score;
                shifted.members.back() = last + 1;
                heap.push(std::move(shifted));
                // expand: add the next perturbation on top
                ProbeSet expanded = std::move(top);
                expanded.score += perts[last + 1].score;
                expanded.members.push_back(last + 1);
                heap.push(std::move(expanded));
            }
        }
    }

    if (stats) stats->candidates = candidates.size();

    std::vector<std::pair<std::int64_t, double>> scored;
    scored.reserve(candidates.size());
    for (std::int32_t i : candidates)
        scored.emplace_back(ids_[i], dot(q.data(), data_.data() + static_cast<std::size_t>(i) * dim_, dim_));
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    scored.resize(take);
    return scored;
}

}  // namespace sim
