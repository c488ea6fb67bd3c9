#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "sim/types.hpp"

namespace sim {

struct StoreStats {
    std::uint64_t users = 0;
    std::uint64_t max_seq_len = 0;
    double mean_seq_len = 0.0;
    std::uint64_t categories_per_user_p99 = 0;

    bool operator==(const StoreStats&) const = default;
};

// User behavior tree: Key-Key-Value index user_id -> category_id -> behaviors
// in recency-descending order. Snapshots are immutable once built; refresh is
// rebuild-and-swap, not in-place mutation.
class UserBehaviorTree {
public:
    struct UserNode {
        std::map<std::int64_t, std::vector<Behavior>> by_category;  // recency-desc lists
        std::uint64_t total = 0;
    };

    UserBehaviorTree() = default;

    // The min(k, available) most recent behaviors of (user, category),
    // returned ascending in time. Unknown user/category yields empty.
    BehaviorSequence query(std::int64_t user_id, std::int64_t category_id, std::size_t k) const;

    // The user's n most recent behaviors across all categories, ascending in
    // time. Cost depends on the category count and n, not the total length.
    BehaviorSequence recent(std::int64_t user_id, std::size_t n) const;

    // Structural invariants: recency-descending lists, consistent counts.
    bool validate() const;

    StoreStats stats() const;

    std::uint64_t user_count() const { return users_.size(); }
    std::uint64_t total_behaviors() const;
    std::int64_t build_timestamp() const { return build_timestamp_; }

    const std::map<std::int64_t, UserNode>& users() const { return users_; }

    // Lifetime count of second-level lookups, for lookup-dedup assertions.
    std::uint64_t query_count() const { return query_count_.load(std::memory_order_relaxed); }

    void save(const std::string& path) const;
    static UserBehaviorTree load(const std::string& path);

    UserBehaviorTree(const UserBehaviorTree& other)
        : users_(other.users_), build_timestamp_(other.build_timestamp_) {}
    UserBehaviorTree& operator=(const UserBehaviorTree& other) {
        users_ = other.users_;
        build_timestamp_ = other.build_timestamp_;
        return *this;
    }
    UserBehaviorTree(UserBehaviorTree&& other) noexcept
        : users_(std::move(other.users_)), build_timestamp_(other.build_timestamp_) {}
    UserBehaviorTree& operator=(UserBehaviorTree&& other) noexcept {
        users_ = std::move(other.users_);
        build_timestamp_ = other.build_timestamp_;
        return *this;
    }

private:
    friend class UbtBuilder;
    std::map<std::int64_t, UserNode> users_;
    std::int64_t build_timestamp_ = 0;
    mutable std::atomic<std::uint64_t> query_count_{0};
};

// Single-writer builder. Lists are kept in arrival order and stable-sorted by
// descending timestamp at build(), so equal timestamps keep insertion order.
// Duplicate (item_id, timestamp) pairs within a (user, category) list are
// dropped, first occurrence wins.
class UbtBuilder {
public:
    UbtBuilder() = default;
    static UbtBuilder from(const UserBehaviorTree& tree);

    void add(std::int64_t user_id, const Behavior& b);

    // Reads `user<TAB>item<TAB>category<TAB>timestamp` lines.
    // Malformed records raise an error naming the line number.
    void add_from_tsv(const std::string& path);

    UserBehaviorTree build(std::int64_t build_timestamp) &&;

private:
    struct PairHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
            return std::hash<std::int64_t>()(p.first) * 0x9e3779b97f4a7c15ULL +
                   std::hash<std::int64_t>()(p.second);
        }
    };
    using SeenSet = std::unordered_set<std::pair<std::int64_t, std::int64_t>, PairHash>;
    std::map<std::int64_t, UserBehaviorTree::UserNode> users_;
    // Per (user, category) dedupe keys, build-time only.
    std::map<std::int64_t, std::map<std::int64_t, SeenSet>> seen_;
};

// Convenience single-behavior refresh: clones, inserts, rebuilds.
UserBehaviorTree ubt_insert(const UserBehaviorTree& tree, std::int64_t user_id, const Behavior& b);

}  // namespace sim
