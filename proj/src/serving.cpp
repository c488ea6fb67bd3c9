#include "sim/serving.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "sim/esu.hpp"
#include "sim/gsu.hpp"
#include "sim/io.hpp"
#include "sim/rng.hpp"

namespace sim {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

ScoreService::ScoreService(std::shared_ptr<const UserBehaviorTree> tree,
                           std::shared_ptr<const SimModel> model)
    : tree_(std::move(tree)), model_(std::move(model)) {
    if (!tree_ || !model_) throw std::invalid_argument("ScoreService: null snapshot or model");
    if (model_->cfg.variant != ModelVariant::kSim || model_->cfg.mode != GsuMode::kHard)
        throw std::invalid_argument("ScoreService: serving requires a hard-mode SIM model");
}

std::shared_ptr<const UserBehaviorTree> ScoreService::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return tree_;
}

bool ScoreService::swap_snapshot(std::shared_ptr<const UserBehaviorTree> tree) {
    if (!tree || !tree->validate()) return false;
    std::lock_guard<std::mutex> lock(mu_);
    tree_ = std::move(tree);
    return true;
}

ScoreResponse ScoreService::score(const ScoreRequest& req) const {
    const auto t0 = Clock::now();
    if (req.candidates.empty() || req.candidates.size() > 500)
        throw ProtocolError("score: candidate count must be in 1..500");
    if (req.request_time < 0) throw ProtocolError("score: negative request_time");

    const auto tree = snapshot();  // pin one snapshot for the whole request
    const SimModel& model = *model_;
    const auto k = static_cast<std::size_t>(model.cfg.sbs_k);

    const BehaviorSequence short_seq =
        tree->recent(req.user_id, static_cast<std::size_t>(model.cfg.short_len));

    // One UBT lookup per distinct category.
    std::map<std::int64_t, BehaviorSequence> sbs_by_cat;
    ScoreResponse resp;
    resp.scores.reserve(req.candidates.size());
    resp.sbs_lengths.reserve(req.candidates.size());
    for (const auto& [item_id, category_id] : req.candidates) {
        auto it = sbs_by_cat.find(category_id);
        if (it == sbs_by_cat.end()) {
            CandidateItem probe{item_id, category_id, req.request_time};
            it = sbs_by_cat.emplace(category_id, hard_search(*tree, req.user_id, probe, k)).first;
        }
        const CandidateItem cand{item_id, category_id, req.request_time};
        resp.scores.push_back(esu_forward(it->second, short_seq, cand, model));
        resp.sbs_lengths.push_back(static_cast<std::uint32_t>(it->second.size()));
    }
    resp.latency_us = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
    return resp;
}

// --- benchmark harness ------------------------------------------------------

std::vector<ScoreRequest> make_workload(const UserBehaviorTree& tree, std::int64_t request_time,
                                        const BenchConfig& cfg) {
    if (tree.users().empty()) throw std::invalid_argument("make_workload: empty tree");
    std::vector<std::int64_t> user_ids;
    user_ids.reserve(tree.users().size());
    for (const auto& [uid, node] : tree.users()) user_ids.push_back(uid);

    Rng rng(cfg.seed);
    std::vector<ScoreRequest> pool;
    pool.reserve(cfg.pool_size);
    for (int r = 0; r < cfg.pool_size; ++r) {
        const std::int64_t uid = user_ids[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(user_ids.size()) - 1))];
        const auto& node = tree.users().at(uid);
        std::vector<std::int64_t> cats;
        for (const auto& [cid, list] : node.by_category) cats.push_back(cid);
        std::vector<std::int64_t> chosen;
        const int want = std::min<int>(cfg.max_categories_per_request, static_cast<int>(cats.size()));
        for (int c = 0; c < want; ++c) {
            const auto pick = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(cats.size()) - 1));
            chosen.push_back(cats[pick]);
            cats.erase(cats.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        ScoreRequest req;
        req.user_id = uid;
        req.request_time = request_time;
        for (int i = 0; i < cfg.candidates_per_request; ++i) {
            const std::int64_t cat = chosen[static_cast<std::size_t>(i) % chosen.size()];
            req.candidates.emplace_back(rng.uniform_int(0, 1 << 20), cat);
        }
        pool.push_back(std::move(req));
    }
    return pool;
}

namespace {
double percentile_ms(std::vector<double>& sorted_us, double q) {
    if (sorted_us.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(sorted_us.size() - 1));
    return sorted_us[idx] / 1000.0;
}
}  // namespace

std::vector<BenchResult> run_bench(const ScoreService& service,
                                   const std::vector<ScoreRequest>& pool, const BenchConfig& cfg) {
    if (pool.empty()) throw std::invalid_argument("run_bench: empty request pool");
    std::vector<BenchResult> results;
    for (const double target : cfg.throughput_levels) {
        if (target <= 0.0) {
            // A zero level means one synchronous request.
            const auto t0 = Clock::now();
            (void)service.score(pool.front());
            const double us =
                std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count() /
                1000.0;
            BenchResult r;
            r.target_rps = 0.0;
            r.requests = 1;
            r.achieved_rps = 0.0;
            r.p50_ms = r.p95_ms = r.p99_ms = us / 1000.0;
            results.push_back(r);
            continue;
        }
        const int threads = std::max(1, cfg.threads);
        const double per_worker_rps = target / threads;
        const auto interval = per_worker_rps > 0.0
                                  ? std::chrono::duration<double>(1.0 / per_worker_rps)
                                  : std::chrono::duration<double>(0.0);

        std::vector<std::vector<double>> latencies(threads);
        std::atomic<std::uint64_t> late{0};
        std::atomic<std::uint64_t> issued{0};
        const auto start = Clock::now();
        const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                          std::chrono::duration<double>(cfg.duration_s));

        std::vector<std::thread> workers;
        workers.reserve(threads);
        for (int w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                auto next = start;
                std::size_t cursor = static_cast<std::size_t>(w);
                while (true) {
                    next += std::chrono::duration_cast<Clock::duration>(interval);
                    const auto now = Clock::now();
                    if (now >= deadline) break;
                    if (next > now) {
                        std::this_thread::sleep_until(next);
                    } else {
                        late.fetch_add(1, std::memory_order_relaxed);
                    }
                    const auto& req = pool[cursor % pool.size()];
                    cursor += threads;
                    const auto t0 = Clock::now();
                    (void)service.score(req);
                    const auto t1 = Clock::now();
                    latencies[w].push_back(
                        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() /
                        1000.0);
                    issued.fetch_add(1, std::memory_order_relaxed);
                }
            });
        }
        for (auto& t : workers) t.join();
        const double elapsed =
            std::chrono::duration<double>(Clock::now() - start).count();

        std::vector<double> all;
        for (auto& v : latencies) all.insert(all.end(), v.begin(), v.end());
        std::sort(all.begin(), all.end());

        BenchResult r;
        r.target_rps = target;
        r.requests = issued.load();
        r.achieved_rps = elapsed > 0.0 ? static_cast<double>(r.requests) / elapsed : 0.0;
        r.p50_ms = percentile_ms(all, 0.50);
        r.p95_ms = percentile_ms(all, 0.95);
        r.p99_ms = percentile_ms(all, 0.99);
        r.saturated = target > 0.0 && (r.achieved_rps < 0.9 * target ||
                                       late.load() > r.requests / 10);
        results.push_back(r);
    }
    return results;
}

// --- transport --------------------------------------------------------------

std::string handle_request_line(ScoreService& service, const std::string& line) {
    json reply;
    try {
        const json msg = json::parse(line);
        if (msg.contains("cmd")) {
            const std::string cmd = msg.at("cmd").get<std::string>();
            if (cmd == "swap_index") {
                auto tree = std::make_shared<UserBehaviorTree>(
                    UserBehaviorTree::load(msg.at("path").get<std::string>()));
                const bool ok = service.swap_snapshot(std::move(tree));
                reply["ok"] = ok;
                if (!ok) reply["error"] = "snapshot validation failed; old snapshot retained";
            } else if (cmd == "stats") {
                const auto stats = service.snapshot()->stats();
                reply["ok"] = true;
                reply["users"] = stats.users;
                reply["max_seq_len"] = stats.max_seq_len;
                reply["mean_seq_len"] = stats.mean_seq_len;
            } else {
                reply["ok"] = false;
                reply["error"] = "unknown command: " + cmd;
            }
            return reply.dump();
        }
        ScoreRequest req;
        req.user_id = msg.at("user_id").get<std::int64_t>();
        req.request_time = msg.at("request_time").get<std::int64_t>();
        for (const auto& c : msg.at("candidates")) {
            req.candidates.emplace_back(c.at("item_id").get<std::int64_t>(),
                                        c.at("category_id").get<std::int64_t>());
        }
        const ScoreResponse resp = service.score(req);
        reply["scores"] = resp.scores;
        reply["sbs_lengths"] = resp.sbs_lengths;
        reply["latency_us"] = resp.latency_us;
    } catch (const std::exception& e) {
        reply = json{{"error", e.what()}};
    }
    return reply.dump();
}

TcpServer::TcpServer(ScoreService& service, int port) : service_(service) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        throw IoError("bind() failed for port " + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 64) != 0) {
        ::close(listen_fd_);
        throw IoError("listen() failed");
    }
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
    bool expected = true;
    if (!running_.compare_exchange_strong(expected, false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard<std::mutex> lock(conn_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : conn_threads_)
        if (t.joinable()) t.join();
}

void TcpServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        std::lock_guard<std::mutex> lock(conn_mu_);
        conn_fds_.push_back(fd);
        conn_threads_.emplace_back([this, fd] { handle_connection(fd); });
    }
}

void TcpServer::handle_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    while (true) {
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            const std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (line.empty()) continue;
            const std::string out = handle_request_line(service_, line) + "\n";
            std::size_t sent = 0;
            while (sent < out.size()) {
                const ssize_t m = ::send(fd, out.data() + sent, out.size() - sent, 0);
                if (m <= 0) return;
                sent += static_cast<std::size_t>(m);
            }
        }
    }
    ::close(fd);
}

void batch_score(ScoreService& service, const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) throw IoError("cannot open: " + in_path);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out << handle_request_line(service, line) << '\n';
    }
    if (!out) throw IoError("write failed: " + out_path);
}

}  // namespace sim
