#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sim/mat.hpp"
#include "sim/rng.hpp"

namespace sim {

// Learnable id -> dense vector map. Row 0 is the out-of-vocabulary row; ids
// in [0, vocab) map to rows [1, vocab].
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    EmbeddingTable(std::int64_t vocab, int dim, double init_scale, Rng& rng)
        : vocab_(vocab), dim_(dim), data_(static_cast<std::size_t>(vocab + 1) * dim) {
        for (auto& x : data_) x = (rng.uniform() * 2.0 - 1.0) * init_scale;
    }

    std::int64_t vocab() const { return vocab_; }
    int dim() const { return dim_; }
    std::int64_t rows() const { return vocab_ + 1; }

    std::int64_t row_of(std::int64_t id) const {
        return (id >= 0 && id < vocab_) ? id + 1 : 0;
    }

    const double* row(std::int64_t row_index) const {
        return data_.data() + static_cast<std::size_t>(row_index) * dim_;
    }
    double* row(std::int64_t row_index) {
        return data_.data() + static_cast<std::size_t>(row_index) * dim_;
    }

    // Embedding vector for an id; unseen ids resolve to the OOV row.
    const double* lookup(std::int64_t id) const { return row(row_of(id)); }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

private:
    std::int64_t vocab_ = 0;
    int dim_ = 0;
    std::vector<double> data_;
};

}  // namespace sim
