#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "sim/model.hpp"
#include "sim/ubt.hpp"

namespace sim {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScoreRequest {
    std::int64_t user_id = 0;
    std::int64_t request_time = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> candidates;  // (item, category)
};

struct ScoreResponse {
    std::vector<double> scores;
    std::vector<std::uint32_t> sbs_lengths;
    std::int64_t latency_us = 0;
};

// Online scoring path: hard-search against the current UBT snapshot, batched
// ESU inference per candidate. Candidates sharing a category reuse one
// lookup. The (snapshot, model) pair is immutable; handlers only ever copy
// the shared pointers, and snapshot swap is the single mutation point.
class ScoreService {
public:
    ScoreService(std::shared_ptr<const UserBehaviorTree> tree,
                 std::shared_ptr<const SimModel> model);

    ScoreResponse score(const ScoreRequest& req) const;

    // Atomically replaces the snapshot. Rejects trees that fail validation;
    // in-flight requests finish on the snapshot they started with.
    bool swap_snapshot(std::shared_ptr<const UserBehaviorTree> tree);

    std::shared_ptr<const UserBehaviorTree> snapshot() const;
    std::shared_ptr<const SimModel> model() const { return model_; }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const UserBehaviorTree> tree_;
    std::shared_ptr<const SimModel> model_;
};

// --- benchmark harness ------------------------------------------------------

struct BenchConfig {
    std::vector<double> throughput_levels;  // target requests/s
    double duration_s = 5.0;
    int threads = 4;
    int candidates_per_request = 100;
    int max_categories_per_request = 5;
    int pool_size = 512;
    std::uint64_t seed = 7;
};

struct BenchResult {
    double target_rps = 0.0;
    double achieved_rps = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    std::uint64_t requests = 0;
    bool saturated = false;
};

// Deterministic request pool drawn from the snapshot's users and their
// categories; request_time must postdate every stored behavior.
std::vector<ScoreRequest> make_workload(const UserBehaviorTree& tree, std::int64_t request_time,
                                        const BenchConfig& cfg);

// Closed-loop load at each target level: `threads` workers issue paced
// requests and record end-to-end latency. A level that cannot keep pace is
// reported saturated, not failed.
std::vector<BenchResult> run_bench(const ScoreService& service,
                                   const std::vector<ScoreRequest>& pool, const BenchConfig& cfg);

// --- transport --------------------------------------------------------------

// Newline-delimited JSON over TCP. One JSON object per line; responses are
// {"scores":[...],"sbs_lengths":[...],"latency_us":n}. The admin message
// {"cmd":"swap_index","path":...} hot-swaps the snapshot.
class TcpServer {
public:
    TcpServer(ScoreService& service, int port);  // port 0 picks an ephemeral port
    ~TcpServer();

    int port() const { return port_; }
    void stop();

private:
    void accept_loop();
    void handle_connection(int fd);

    ScoreService& service_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex conn_mu_;
    std::vector<int> conn_fds_;
    std::vector<std::thread> conn_threads_;
};

std::string handle_request_line(ScoreService& service, const std::string& line);

// Equivalent batch mode: requests in, responses out, one JSON per line.
void batch_score(ScoreService& service, const std::string& in_path, const std::string& out_path);

}  // namespace sim
