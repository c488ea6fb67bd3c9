#include "sim/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "sim/io.hpp"
#include "sim/mlp.hpp"
#include "sim/rng.hpp"

namespace sim {

namespace {
constexpr std::int64_t kBaseTime = 1600000000;  // fixed epoch anchor for generated data
}

void GenConfig::validate() const {
    if (users == 0) throw std::invalid_argument("gen: users must be > 0");
    if (categories <= 0 || items < categories)
        throw std::invalid_argument("gen: need items >= categories > 0");
    if (!(noise >= 0.0 && noise < 0.5))
        throw std::invalid_argument("gen: noise must be in [0, 0.5)");
    if (affinity_per_user < 1 || affinity_per_user > categories)
        throw std::invalid_argument("gen: affinity_per_user out of range");
    if (len_min == 0 || len_max < len_min)
        throw std::invalid_argument("gen: bad length bounds");
    if (len_max > 54000) throw std::invalid_argument("gen: len_max above 54000");
    if (samples_per_user < 1) throw std::invalid_argument("gen: samples_per_user must be >= 1");
    if (!(affinity_prob >= 0.0 && affinity_prob <= 1.0))
        throw std::invalid_argument("gen: affinity_prob out of range");
    if (cand_affinity_frac < 0 || cand_history_frac < 0 ||
        cand_affinity_frac + cand_history_frac > 1.0)
        throw std::invalid_argument("gen: candidate mix fractions out of range");
    if (short_len < 0) throw std::invalid_argument("gen: short_len must be >= 0");
}

GenOutput generate(const GenConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    GenOutput out;
    const std::int64_t per_cat = cfg.items / cfg.categories;
    const std::int64_t horizon_s = static_cast<std::int64_t>(cfg.horizon_days) * 86400;

    auto item_of = [&](std::int64_t cat) {
        return cat + cfg.categories * rng.uniform_int(0, per_cat - 1);
    };

    std::vector<std::int64_t> affinity(cfg.affinity_per_user);
    for (std::uint64_t u = 0; u < cfg.users; ++u) {
        // distinct affinity categories
        for (int a = 0; a < cfg.affinity_per_user;) {
            const std::int64_t c = rng.uniform_int(0, cfg.categories - 1);
            bool dup = false;
            for (int b = 0; b < a; ++b) dup |= (affinity[b] == c);
            if (!dup) affinity[a++] = c;
        }

        const double raw_len = rng.lognormal(cfg.len_log_mu, cfg.len_log_sigma);
        const auto len = static_cast<std::uint64_t>(std::min<double>(
            static_cast<double>(cfg.len_max),
            std::max<double>(static_cast<double>(cfg.len_min), std::floor(raw_len))));

        std::vector<std::int64_t> ts(len);
        for (auto& t : ts) t = kBaseTime - rng.uniform_int(1, horizon_s);
        std::sort(ts.begin(), ts.end());

        std::vector<Behavior> history;
        history.reserve(len);
        for (std::uint64_t i = 0; i < len; ++i) {
            const std::int64_t cat =
                rng.bernoulli(cfg.affinity_prob)
                    ? affinity[static_cast<std::size_t>(rng.uniform_int(0, cfg.affinity_per_user - 1))]
                    : rng.uniform_int(0, cfg.categories - 1);
            Behavior b{item_of(cat), cat, ts[i]};
            history.push_back(b);
            out.behaviors.emplace_back(static_cast<std::int64_t>(u), b);
        }

        // distinct categories of the long part, for the "grazed" candidate draw
        BehaviorSequence full(history);
        auto [long_part, short_part] = split_short_long(full, static_cast<std::size_t>(cfg.short_len));
        std::vector<std::int64_t> long_cats;
        for (const auto& b : long_part.behaviors) {
            if (std::find(long_cats.begin(), long_cats.end(), b.category_id) == long_cats.end())
                long_cats.push_back(b.category_id);
        }

        for (int s = 0; s < cfg.samples_per_user; ++s) {
            const std::int64_t request_time = ts.back() + 3600 * (s + 1);
            std::int64_t cat;
            const double r = rng.uniform();
            if (r < cfg.cand_affinity_frac) {
                cat = affinity[static_cast<std::size_t>(rng.uniform_int(0, cfg.affinity_per_user - 1))];
            } else if (r < cfg.cand_affinity_frac + cfg.cand_history_frac && !long_cats.empty()) {
                cat = long_cats[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(long_cats.size()) - 1))];
            } else {
                cat = rng.uniform_int(0, cfg.categories - 1);
            }
            int matches = 0;
            for (const auto& b : long_part.behaviors) matches += (b.category_id == cat);
            const double p = sigmoid(cfg.label_w * matches + cfg.label_b);
            int label = rng.bernoulli(p) ? 1 : 0;
            if (rng.bernoulli(cfg.noise)) label = 1 - label;
            out.samples.push_back(
                {static_cast<std::int64_t>(u), item_of(cat), cat, request_time, label});
        }
    }
    return out;
}

std::vector<TrainingSample> assemble_samples(
    const std::vector<std::pair<std::int64_t, Behavior>>& behaviors,
    const std::vector<RawSample>& samples, int short_len) {
    std::unordered_map<std::int64_t, std::vector<Behavior>> by_user;
    for (const auto& [uid, b] : behaviors) by_user[uid].push_back(b);
    for (auto& [uid, list] : by_user)
        std::stable_sort(list.begin(), list.end(),
                         [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });

    std::vector<TrainingSample> out;
    out.reserve(samples.size());
    for (const auto& rs : samples) {
        TrainingSample t;
        t.user_id = rs.user_id;
        t.candidate = {rs.item_id, rs.category_id, rs.request_time};
        t.label = rs.label;
        BehaviorSequence hist;
        auto it = by_user.find(rs.user_id);
        if (it != by_user.end()) {
            for (const auto& b : it->second) {
                if (b.timestamp < rs.request_time) hist.behaviors.push_back(b);
                else break;
            }
        }
        for (const auto& b : hist.behaviors) {
            if (b.timestamp >= rs.request_time)
                throw std::runtime_error("assemble_samples: future behavior leaked into history");
        }
        auto [long_part, short_part] = split_short_long(hist, static_cast<std::size_t>(short_len));
        t.long_seq = std::move(long_part);
        t.short_seq = std::move(short_part);
        out.push_back(std::move(t));
    }
    return out;
}

int n_match(const TrainingSample& s) {
    int matches = 0;
    for (const auto& b : s.long_seq.behaviors)
        matches += (b.category_id == s.candidate.category_id);
    return matches;
}

void write_behaviors_tsv(const std::string& path,
                         const std::vector<std::pair<std::int64_t, Behavior>>& behaviors) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [uid, b] : behaviors)
        out << uid << '\t' << b.item_id << '\t' << b.category_id << '\t' << b.timestamp << '\n';
    if (!out) throw IoError("write failed: " + path);
}

void write_samples_tsv(const std::string& path, const std::vector<RawSample>& samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& s : samples)
        out << s.user_id << '\t' << s.item_id << '\t' << s.category_id << '\t' << s.request_time
            << '\t' << s.label << '\n';
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<std::int64_t, Behavior>> load_behaviors_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::pair<std::int64_t, Behavior>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::int64_t uid, item, cat, ts;
        std::istringstream ss(line);
        if (!(ss >> uid >> item >> cat >> ts))
            throw std::runtime_error("malformed behavior line at " + path + ":" + std::to_string(line_no));
        out.emplace_back(uid, Behavior{item, cat, ts});
    }
    return out;
}

std::vector<RawSample> load_samples_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<RawSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        RawSample s;
        std::istringstream ss(line);
        if (!(ss >> s.user_id >> s.item_id >> s.category_id >> s.request_time >> s.label))
            throw std::runtime_error("malformed sample line at " + path + ":" + std::to_string(line_no));
        out.push_back(s);
    }
    return out;
}

IngestOutput ingest_tsv(const std::string& path, IngestSchema schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    IngestOutput out;
    auto remap = [](std::map<std::int64_t, std::int64_t>& dict, std::int64_t raw) {
        auto [it, inserted] = dict.emplace(raw, static_cast<std::int64_t>(dict.size()));
        return it->second;
    };

    std::unordered_map<std::int64_t, std::int64_t> last_ts;  // per user, arrival order
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.stats.lines += 1;
        std::int64_t uid, item, cat, ts;
        int label = 1;
        std::istringstream ss(line);
        bool ok = static_cast<bool>(ss >> uid >> item >> cat >> ts);
        if (ok && schema == IngestSchema::kClicks) ok = static_cast<bool>(ss >> label);
        if (!ok)
            throw std::runtime_error("malformed record at " + path + ":" + std::to_string(line_no));
        if (ts < 0) {
            out.stats.rejected += 1;
            continue;
        }
        const std::int64_t duid = remap(out.user_dict, uid);
        const std::int64_t ditem = remap(out.item_dict, item);
        const std::int64_t dcat = remap(out.cat_dict, cat);

        auto [it, fresh] = last_ts.try_emplace(duid, ts);
        if (!fresh) {
            if (ts < it->second) out.stats.out_of_order += 1;
            it->second = std::max(it->second, ts);
        }

        if (schema == IngestSchema::kReviews) {
            out.behaviors.emplace_back(duid, Behavior{ditem, dcat, ts});
        } else {
            out.samples.push_back({duid, ditem, dcat, ts, label});
            if (label == 1) out.behaviors.emplace_back(duid, Behavior{ditem, dcat, ts});
        }
    }

    // Per-user time order regardless of line order.
    std::stable_sort(out.behaviors.begin(), out.behaviors.end(),
                     [](const auto& a, const auto& b) {
                         if (a.first != b.first) return a.first < b.first;
                         return a.second.timestamp < b.second.timestamp;
                     });

    if (schema == IngestSchema::kReviews) {
        // The last behavior of each user becomes a positive sample; the join
        // in assemble_samples keeps it out of its own history.
        std::map<std::int64_t, Behavior> last;
        for (const auto& [uid, b] : out.behaviors) {
            auto [it, fresh] = last.try_emplace(uid, b);
            if (!fresh && b.timestamp >= it->second.timestamp) it->second = b;
        }
        for (const auto& [uid, b] : last)
            out.samples.push_back({uid, b.item_id, b.category_id, b.timestamp, 1});
    }

    out.stats.users = out.user_dict.size();
    out.stats.items = out.item_dict.size();
    out.stats.categories = out.cat_dict.size();
    return out;
}

}  // namespace sim
