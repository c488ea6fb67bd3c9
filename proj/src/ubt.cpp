#include "sim/ubt.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sim/io.hpp"

namespace sim {

namespace {
constexpr char kMagic[8] = {'S', 'I', 'M', 'U', 'B', 'T', '1', '\0'};
}

BehaviorSequence UserBehaviorTree::query(std::int64_t user_id, std::int64_t category_id,
                                         std::size_t k) const {
    BehaviorSequence out;
    if (k == 0) throw std::invalid_argument("ubt query: k must be > 0");
    query_count_.fetch_add(1, std::memory_order_relaxed);
    auto uit = users_.find(user_id);
    if (uit == users_.end()) return out;
    auto cit = uit->second.by_category.find(category_id);
    if (cit == uit->second.by_category.end()) return out;
    const auto& list = cit->second;  // recency-descending
    const std::size_t n = std::min(k, list.size());
    out.behaviors.assign(list.begin(), list.begin() + n);
    std::reverse(out.behaviors.begin(), out.behaviors.end());
    return out;
}

BehaviorSequence UserBehaviorTree::recent(std::int64_t user_id, std::size_t n) const {
    BehaviorSequence out;
    if (n == 0) return out;
    auto uit = users_.find(user_id);
    if (uit == users_.end()) return out;
    // Only the first n entries of each category list can make the cut.
    std::vector<Behavior> pool;
    for (const auto& [cid, list] : uit->second.by_category) {
        const std::size_t take = std::min(n, list.size());
        pool.insert(pool.end(), list.begin(), list.begin() + take);
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Behavior& a, const Behavior& b) {
        return a.timestamp > b.timestamp;
    });
    const std::size_t take = std::min(n, pool.size());
    out.behaviors.assign(pool.begin(), pool.begin() + take);
    std::reverse(out.behaviors.begin(), out.behaviors.end());
    return out;
}

bool UserBehaviorTree::validate() const {
    for (const auto& [uid, node] : users_) {
        std::uint64_t count = 0;
        for (const auto& [cid, list] : node.by_category) {
            count += list.size();
            for (std::size_t i = 1; i < list.size(); ++i)
                if (list[i].timestamp > list[i - 1].timestamp) return false;
            for (const auto& b : list)
                if (b.category_id != cid) return false;
        }
        if (count != node.total) return false;
    }
    return true;
}

StoreStats UserBehaviorTree::stats() const {
    StoreStats s;
    s.users = users_.size();
    if (users_.empty()) return s;
    std::vector<std::uint64_t> cat_counts;
    cat_counts.reserve(users_.size());
    std::uint64_t total = 0;
    for (const auto& [uid, node] : users_) {
        total += node.total;
        s.max_seq_len = std::max(s.max_seq_len, node.total);
        cat_counts.push_back(node.by_category.size());
    }
    s.mean_seq_len = static_cast<double>(total) / static_cast<double>(users_.size());
    std::sort(cat_counts.begin(), cat_counts.end());
    const std::size_t idx =
        std::min(cat_counts.size() - 1,
                 static_cast<std::size_t>(0.99 * static_cast<double>(cat_counts.size())));
    s.categories_per_user_p99 = cat_counts[idx];
    return s;
}

std::uint64_t UserBehaviorTree::total_behaviors() const {
    std::uint64_t total = 0;
    for (const auto& [uid, node] : users_) total += node.total;
    return total;
}

void UserBehaviorTree::save(const std::string& path) const {
    BinaryWriter w(path);
    w.write_bytes(kMagic, sizeof kMagic);
    w.write_i64(build_timestamp_);
    w.write_u64(users_.size());
    for (const auto& [uid, node] : users_) {
        w.write_i64(uid);
        w.write_u64(node.total);
        w.write_u32(static_cast<std::uint32_t>(node.by_category.size()));
        for (const auto& [cid, list] : node.by_category) {
            w.write_i64(cid);
            w.write_u32(static_cast<std::uint32_t>(list.size()));
            for (const auto& b : list) {
                w.write_i64(b.item_id);
                w.write_i64(b.timestamp);
            }
        }
    }
    w.finish_with_checksum();
}

UserBehaviorTree UserBehaviorTree::load(const std::string& path) {
    BinaryReader r(path);
    r.verify_checksum();
    char magic[8];
    r.read_bytes(magic, sizeof magic);
    if (std::memcmp(magic, "SIMUBT", 6) != 0)
        throw IoError("not a UBT file: " + path);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatVersionError("unsupported UBT version in " + path);
    UserBehaviorTree tree;
    tree.build_timestamp_ = r.read_i64();
    const std::uint64_t user_count = r.read_u64();
    for (std::uint64_t u = 0; u < user_count; ++u) {
        const std::int64_t uid = r.read_i64();
        UserNode node;
        node.total = r.read_u64();
        const std::uint32_t cats = r.read_u32();
        for (std::uint32_t c = 0; c < cats; ++c) {
            const std::int64_t cid = r.read_i64();
            const std::uint32_t count = r.read_u32();
            std::vector<Behavior> list;
            list.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i) {
                Behavior b;
                b.item_id = r.read_i64();
                b.timestamp = r.read_i64();
                b.category_id = cid;
                list.push_back(b);
            }
            node.by_category.emplace(cid, std::move(list));
        }
        tree.users_.emplace(uid, std::move(node));
    }
    if (!r.at_payload_end()) throw IoError("trailing bytes in UBT file: " + path);
    return tree;
}

UbtBuilder UbtBuilder::from(const UserBehaviorTree& tree) {
    UbtBuilder b;
    b.users_ = tree.users_;
    // Lists arrive recency-descending; arrival order here is newest-first,
    // which the stable sort at build() preserves.
    for (const auto& [uid, node] : b.users_) {
        for (const auto& [cid, list] : node.by_category) {
            auto& seen = b.seen_[uid][cid];
            for (const auto& beh : list) seen.emplace(beh.item_id, beh.timestamp);
        }
    }
    return b;
}

void UbtBuilder::add(std::int64_t user_id, const Behavior& b) {
    if (b.item_id < 0 || b.category_id < 0 || b.timestamp < 0)
        throw std::invalid_argument("ubt add: negative id or timestamp");
    auto& seen = seen_[user_id][b.category_id];
    if (!seen.emplace(b.item_id, b.timestamp).second) return;  // replayed impression, drop
    auto& node = users_[user_id];
    node.by_category[b.category_id].push_back(b);
    node.total += 1;
}

void UbtBuilder::add_from_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open log: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::int64_t uid, item, cat, ts;
        std::istringstream ss(line);
        if (!(ss >> uid >> item >> cat >> ts)) {
            throw std::runtime_error("malformed behavior record at " + path + ":" +
                                     std::to_string(line_no));
        }
        add(uid, Behavior{item, cat, ts});
    }
}

UserBehaviorTree UbtBuilder::build(std::int64_t build_timestamp) && {
    for (auto& [uid, node] : users_) {
        for (auto& [cid, list] : node.by_category) {
            std::stable_sort(list.begin(), list.end(),
                             [](const Behavior& a, const Behavior& b) {
                                 return a.timestamp > b.timestamp;
                             });
        }
    }
    UserBehaviorTree tree;
    tree.users_ = std::move(users_);
    tree.build_timestamp_ = build_timestamp;
    return tree;
}

UserBehaviorTree ubt_insert(const UserBehaviorTree& tree, std::int64_t user_id,
                            const Behavior& b) {
    UbtBuilder builder = UbtBuilder::from(tree);
    builder.add(user_id, b);
    return std::move(builder).build(tree.build_timestamp());
}

}  // namespace sim
