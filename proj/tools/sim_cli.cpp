// Command-line entry point wiring all subcommands: datagen, ingest,
// build-index, train, eval, serve, bench, gsu-bench.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Logs go to stderr
// as key=value lines; primary outputs are files named by the subcommand
// flags, each with a <artifact>.config sidecar echoing the resolved
// configuration for reproducibility.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "sim/alsh.hpp"
#include "sim/datagen.hpp"
#include "sim/metrics.hpp"
#include "sim/model.hpp"
#include "sim/serving.hpp"
#include "sim/trainer.hpp"
#include "sim/ubt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sim;

namespace {

void log_kv(const std::string& event, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cerr << "event=" << event;
    for (const auto& [k, v] : kv) std::cerr << ' ' << k << '=' << v;
    std::cerr << '\n';
}

void write_config_sidecar(const std::string& artifact_path, const std::string& resolved) {
    std::ofstream out(artifact_path + ".config");
    out << resolved;
}

std::vector<TrainingSample> load_dataset(const std::string& dir, int short_len) {
    const auto behaviors = load_behaviors_tsv(dir + "/behaviors.tsv");
    const auto samples = load_samples_tsv(dir + "/samples.tsv");
    return assemble_samples(behaviors, samples, short_len);
}

std::pair<std::int64_t, std::int64_t> dataset_vocab(const std::string& dir) {
    std::int64_t max_item = -1, max_cat = -1;
    for (const auto& [uid, b] : load_behaviors_tsv(dir + "/behaviors.tsv")) {
        max_item = std::max(max_item, b.item_id);
        max_cat = std::max(max_cat, b.category_id);
    }
    for (const auto& s : load_samples_tsv(dir + "/samples.tsv")) {
        max_item = std::max(max_item, s.item_id);
        max_cat = std::max(max_cat, s.category_id);
    }
    return {max_item + 1, max_cat + 1};
}

std::int64_t tree_max_timestamp(const UserBehaviorTree& tree) {
    std::int64_t best = 0;
    for (const auto& [uid, node] : tree.users())
        for (const auto& [cid, list] : node.by_category)
            if (!list.empty()) best = std::max(best, list.front().timestamp);
    return best;
}

json histogram_to_json(const DCategoryHistogram& h) {
    json bins = json::array();
    for (const auto& b : h.bins)
        bins.push_back({{"label", b.label}, {"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
    return json{{"bins", bins}, {"total", h.total}};
}

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

struct CliError {
    int code;
    std::string message;
};

int run_cli(int argc, char** argv) {
    CLI::App app{"Two-stage lifelong-interest CTR scorer: index, train, evaluate, serve"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from an INI/TOML config file");
    app.allow_config_extras(CLI::config_extras_mode::ignore_all);

    // --- datagen ---
    auto* gen_cmd = app.add_subcommand("datagen", "Generate a synthetic planted-signal dataset");
    GenConfig gen_cfg;
    std::string gen_out;
    gen_cmd->add_option("--out", gen_out, "Output directory")->required();
    gen_cmd->add_option("--users", gen_cfg.users);
    gen_cmd->add_option("--items", gen_cfg.items);
    gen_cmd->add_option("--categories", gen_cfg.categories);
    gen_cmd->add_option("--len-max", gen_cfg.len_max);
    gen_cmd->add_option("--len-min", gen_cfg.len_min);
    gen_cmd->add_option("--len-log-mu", gen_cfg.len_log_mu);
    gen_cmd->add_option("--len-log-sigma", gen_cfg.len_log_sigma);
    gen_cmd->add_option("--affinity-per-user", gen_cfg.affinity_per_user);
    gen_cmd->add_option("--affinity-prob", gen_cfg.affinity_prob);
    gen_cmd->add_option("--label-w", gen_cfg.label_w);
    gen_cmd->add_option("--label-b", gen_cfg.label_b);
    gen_cmd->add_option("--noise", gen_cfg.noise);
    gen_cmd->add_option("--samples-per-user", gen_cfg.samples_per_user);
    gen_cmd->add_option("--short-len", gen_cfg.short_len);
    gen_cmd->add_option("--seed", gen_cfg.seed);

    // --- ingest ---
    auto* ing_cmd = app.add_subcommand("ingest", "Ingest an external TSV behavior/click log");
    std::string ing_in, ing_out, ing_schema = "reviews", ing_format = "tsv";
    ing_cmd->add_option("--in", ing_in, "Input TSV path")->required();
    ing_cmd->add_option("--out", ing_out, "Output directory")->required();
    ing_cmd->add_option("--format", ing_format, "Input format (tsv)")
        ->check(CLI::IsMember({"tsv"}));
    ing_cmd->add_option("--schema", ing_schema, "reviews (4 cols) or clicks (5 cols)")
        ->check(CLI::IsMember({"reviews", "clicks"}));

    // --- build-index ---
    auto* idx_cmd = app.add_subcommand("build-index", "Build the user behavior tree from logs");
    std::string idx_logs, idx_out;
    idx_cmd->add_option("--logs", idx_logs, "behaviors.tsv path")->required();
    idx_cmd->add_option("--out", idx_out, "Output index path")->required();

    // --- train ---
    auto* tr_cmd = app.add_subcommand("train", "Train the two-stage model");
    std::string tr_data, tr_mode = "hard", tr_out;
    int tr_epochs = 3;
    std::uint64_t tr_seed = 1;
    ModelConfig tr_model_cfg;
    TrainOptions tr_opts;
    bool tr_no_time = false;
    tr_cmd->add_option("--data", tr_data, "Dataset directory (behaviors.tsv + samples.tsv)")->required();
    tr_cmd->add_option("--mode", tr_mode, "hard | soft | avgpool")
        ->check(CLI::IsMember({"hard", "soft", "avgpool"}));
    tr_cmd->add_option("--epochs", tr_epochs);
    tr_cmd->add_option("--seed", tr_seed);
    tr_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
    tr_cmd->add_flag("--no-time-embedding", tr_no_time, "Drop time-interval embeddings");
    tr_cmd->add_option("--embed-dim", tr_model_cfg.embed_dim);
    tr_cmd->add_option("--heads", tr_model_cfg.heads);
    tr_cmd->add_option("--k", tr_model_cfg.sbs_k, "SBS truncation length");
    tr_cmd->add_option("--short-len", tr_model_cfg.short_len);
    tr_cmd->add_option("--lr0", tr_model_cfg.lr0);
    tr_cmd->add_option("--lr-decay", tr_model_cfg.lr_decay);
    tr_cmd->add_option("--batch-size", tr_opts.batch_size);
    tr_cmd->add_option("--holdout-frac", tr_opts.holdout_frac);

    // --- eval ---
    auto* ev_cmd = app.add_subcommand("eval", "Score a dataset and emit the offline report");
    std::string ev_data, ev_ckpt, ev_report;
    int ev_dump_attention = 0;
    ev_cmd->add_option("--data", ev_data)->required();
    ev_cmd->add_option("--ckpt", ev_ckpt)->required();
    ev_cmd->add_option("--report", ev_report)->required();
    ev_cmd->add_option("--dump-attention", ev_dump_attention,
                       "Dump attention traces for the first N clicked samples");

    // --- serve ---
    auto* sv_cmd = app.add_subcommand("serve", "Run the scoring service");
    std::string sv_ckpt, sv_index, sv_batch_in, sv_batch_out;
    int sv_port = 0;
    sv_cmd->add_option("--ckpt", sv_ckpt)->required();
    sv_cmd->add_option("--index", sv_index)->required();
    sv_cmd->add_option("--port", sv_port, "TCP port (0 = ephemeral)");
    sv_cmd->add_option("--batch-in", sv_batch_in, "Batch mode: request file (one JSON per line)");
    sv_cmd->add_option("--batch-out", sv_batch_out, "Batch mode: response file");

    // --- bench ---
    auto* bn_cmd = app.add_subcommand("bench", "Closed-loop latency/throughput benchmark");
    std::string bn_index, bn_ckpt, bn_report, bn_profile;
    BenchConfig bn_cfg;
    bn_cfg.throughput_levels = {50, 100, 200};
    bn_cmd->add_option("--index", bn_index)->required();
    bn_cmd->add_option("--ckpt", bn_ckpt)->required();
    bn_cmd->add_option("--report", bn_report)->required();
    bn_cmd->add_option("--profile", bn_profile,
                       "Workload profile JSON (levels, duration_s, threads, candidates, "
                       "categories, pool_size, seed)");
    bn_cmd->add_option("--levels", bn_cfg.throughput_levels, "Target requests/s levels");
    bn_cmd->add_option("--duration", bn_cfg.duration_s);
    bn_cmd->add_option("--threads", bn_cfg.threads);
    bn_cmd->add_option("--candidates", bn_cfg.candidates_per_request);
    bn_cmd->add_option("--categories", bn_cfg.max_categories_per_request);
    bn_cmd->add_option("--seed", bn_cfg.seed);

    // --- gsu-bench ---
    auto* gb_cmd = app.add_subcommand("gsu-bench", "Stage-one search recall/latency benchmark");
    std::string gb_mode = "alsh", gb_corpus, gb_ckpt, gb_index;
    int gb_k = 50, gb_n = 10000, gb_dim = 16, gb_queries = 1000;
    std::uint64_t gb_seed = 17;
    gb_cmd->add_option("--mode", gb_mode)->check(CLI::IsMember({"hard", "soft", "alsh"}));
    gb_cmd->add_option("--corpus", gb_corpus, "behaviors.tsv (soft) or UBT index (hard)");
    gb_cmd->add_option("--ckpt", gb_ckpt, "Checkpoint (soft mode)");
    gb_cmd->add_option("--k", gb_k);
    gb_cmd->add_option("--n", gb_n, "Corpus size (alsh mode)");
    gb_cmd->add_option("--dim", gb_dim, "Vector dimension (alsh mode)");
    gb_cmd->add_option("--queries", gb_queries);
    gb_cmd->add_option("--seed", gb_seed);
    AlshConfig gb_alsh;
    gb_cmd->add_option("--tables", gb_alsh.tables);
    gb_cmd->add_option("--hashes", gb_alsh.hashes_per_table);
    gb_cmd->add_option("--width", gb_alsh.bucket_width);
    gb_cmd->add_option("--probes", gb_alsh.probes_per_table);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    const std::string resolved = app.config_to_str(true, true);

    if (*gen_cmd) {
        fs::create_directories(gen_out);
        const GenOutput out = generate(gen_cfg);
        write_behaviors_tsv(gen_out + "/behaviors.tsv", out.behaviors);
        write_samples_tsv(gen_out + "/samples.tsv", out.samples);
        write_config_sidecar(gen_out + "/dataset", resolved);
        std::size_t positives = 0;
        for (const auto& s : out.samples) positives += (s.label == 1);
        log_kv("datagen_done", {{"behaviors", std::to_string(out.behaviors.size())},
                                {"samples", std::to_string(out.samples.size())},
                                {"positive_rate",
                                 std::to_string(static_cast<double>(positives) /
                                                static_cast<double>(out.samples.size()))}});
        return 0;
    }

    if (*ing_cmd) {
        fs::create_directories(ing_out);
        const IngestOutput out = ingest_tsv(
            ing_in, ing_schema == "clicks" ? IngestSchema::kClicks : IngestSchema::kReviews);
        write_behaviors_tsv(ing_out + "/behaviors.tsv", out.behaviors);
        write_samples_tsv(ing_out + "/samples.tsv", out.samples);
        write_config_sidecar(ing_out + "/dataset", resolved);
        log_kv("ingest_done", {{"lines", std::to_string(out.stats.lines)},
                               {"rejected", std::to_string(out.stats.rejected)},
                               {"out_of_order", std::to_string(out.stats.out_of_order)},
                               {"users", std::to_string(out.stats.users)},
                               {"items", std::to_string(out.stats.items)},
                               {"categories", std::to_string(out.stats.categories)}});
        return 0;
    }

    if (*idx_cmd) {
        UbtBuilder builder;
        builder.add_from_tsv(idx_logs);
        std::int64_t build_ts = 0;
        for (const auto& [uid, b] : load_behaviors_tsv(idx_logs))
            build_ts = std::max(build_ts, b.timestamp);
        const UserBehaviorTree tree = std::move(builder).build(build_ts);
        tree.save(idx_out);
        write_config_sidecar(idx_out, resolved);
        const StoreStats st = tree.stats();
        log_kv("index_built", {{"users", std::to_string(st.users)},
                               {"max_seq_len", std::to_string(st.max_seq_len)},
                               {"mean_seq_len", std::to_string(st.mean_seq_len)}});
        return 0;
    }

    if (*tr_cmd) {
        const auto [item_vocab, cat_vocab] = dataset_vocab(tr_data);
        ModelConfig cfg = tr_model_cfg;
        cfg.item_vocab = item_vocab;
        cfg.cat_vocab = cat_vocab;
        cfg.use_time = !tr_no_time;
        cfg.init_seed = tr_seed;
        if (tr_mode == "soft") {
            cfg.variant = ModelVariant::kSim;
            cfg.mode = GsuMode::kSoft;
            cfg.alpha = 1.0;
        } else if (tr_mode == "avgpool") {
            cfg.variant = ModelVariant::kAvgPool;
            cfg.mode = GsuMode::kHard;
            cfg.alpha = 0.0;
        } else {
            cfg.variant = ModelVariant::kSim;
            cfg.mode = GsuMode::kHard;
            cfg.alpha = 0.0;
        }
        const auto samples = load_dataset(tr_data, cfg.short_len);
        SimModel model = SimModel::init(cfg);
        TrainOptions opts = tr_opts;
        opts.epochs = tr_epochs;
        opts.seed = tr_seed;
        const TrainResult result = train(samples, model, opts);
        for (const auto& em : result.epochs) {
            log_kv("epoch", {{"epoch", std::to_string(em.epoch)},
                             {"mean_loss", std::to_string(em.mean_loss)},
                             {"holdout_auc",
                              em.holdout_auc ? std::to_string(*em.holdout_auc) : "undefined"}});
        }
        model.save_checkpoint(tr_out);
        write_config_sidecar(tr_out, resolved);
        json metrics;
        metrics["train_count"] = result.train_count;
        metrics["holdout_count"] = result.holdout_count;
        metrics["epochs"] = json::array();
        for (const auto& em : result.epochs) {
            json e{{"epoch", em.epoch}, {"mean_loss", em.mean_loss}};
            if (em.holdout_auc) e["holdout_auc"] = *em.holdout_auc;
            metrics["epochs"].push_back(e);
        }
        std::ofstream(tr_out + ".metrics.json") << metrics.dump(2) << '\n';
        return 0;
    }

    if (*ev_cmd) {
        const SimModel model = SimModel::load_checkpoint(ev_ckpt);
        const auto samples = load_dataset(ev_data, model.cfg.short_len);
        const EvalReport rep = evaluate(samples, model);
        json j;
        j["auc"] = rep.auc;
        j["samples"] = rep.samples;
        j["clicks"] = rep.clicks;
        j["mean_d_category"] = rep.mean_d_category;
        j["p_d_gt_neg1"] = rep.p_d_gt_neg1;
        j["histogram"] = histogram_to_json(rep.histogram);
        std::ofstream(ev_report) << j.dump(2) << '\n';
        write_config_sidecar(ev_report, resolved);
        if (ev_dump_attention > 0 && model.cfg.variant == ModelVariant::kSim) {
            int dumped = 0;
            for (const auto& s : samples) {
                if (s.label != 1) continue;
                const auto k = static_cast<std::size_t>(model.cfg.sbs_k);
                const BehaviorSequence sbs =
                    model.cfg.mode == GsuMode::kHard
                        ? hard_filter(s.long_seq, s.candidate, k)
                        : soft_search_exact(s.long_seq, s.candidate, model, k);
                AttentionTrace trace;
                esu_forward(sbs, s.short_seq, s.candidate, model, &trace);
                json t;
                t["user_id"] = s.user_id;
                t["scores"] = trace.scores;
                std::cerr << "attention " << t.dump() << '\n';
                if (++dumped >= ev_dump_attention) break;
            }
        }
        log_kv("eval_done", {{"auc", std::to_string(rep.auc)},
                             {"samples", std::to_string(rep.samples)}});
        return 0;
    }

    if (*sv_cmd) {
        auto tree = std::make_shared<UserBehaviorTree>(UserBehaviorTree::load(sv_index));
        auto model = std::make_shared<SimModel>(SimModel::load_checkpoint(sv_ckpt));
        ScoreService service(tree, model);
        if (!sv_batch_in.empty()) {
            if (sv_batch_out.empty()) {
                std::cerr << "error: --batch-out required with --batch-in\n";
                return 2;
            }
            batch_score(service, sv_batch_in, sv_batch_out);
            log_kv("batch_done", {{"in", sv_batch_in}, {"out", sv_batch_out}});
            return 0;
        }
        TcpServer server(service, sv_port);
        log_kv("serving", {{"port", std::to_string(server.port())}});
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
        return 0;
    }

    if (*bn_cmd) {
        if (!bn_profile.empty()) {
            std::ifstream in(bn_profile);
            if (!in) throw std::runtime_error("cannot open profile: " + bn_profile);
            const json prof = json::parse(in);
            if (prof.contains("levels"))
                bn_cfg.throughput_levels = prof["levels"].get<std::vector<double>>();
            if (prof.contains("duration_s")) bn_cfg.duration_s = prof["duration_s"].get<double>();
            if (prof.contains("threads")) bn_cfg.threads = prof["threads"].get<int>();
            if (prof.contains("candidates"))
                bn_cfg.candidates_per_request = prof["candidates"].get<int>();
            if (prof.contains("categories"))
                bn_cfg.max_categories_per_request = prof["categories"].get<int>();
            if (prof.contains("pool_size")) bn_cfg.pool_size = prof["pool_size"].get<int>();
            if (prof.contains("seed")) bn_cfg.seed = prof["seed"].get<std::uint64_t>();
        }
        auto tree = std::make_shared<UserBehaviorTree>(UserBehaviorTree::load(bn_index));
        auto model = std::make_shared<SimModel>(SimModel::load_checkpoint(bn_ckpt));
        ScoreService service(tree, model);
        const std::int64_t request_time = tree_max_timestamp(*tree) + 86400;
        const auto pool = make_workload(*tree, request_time, bn_cfg);
        const auto results = run_bench(service, pool, bn_cfg);
        json report = json::array();
        for (const auto& r : results) {
            report.push_back({{"target_rps", r.target_rps},
                              {"achieved_rps", r.achieved_rps},
                              {"p50_ms", r.p50_ms},
                              {"p95_ms", r.p95_ms},
                              {"p99_ms", r.p99_ms},
                              {"requests", r.requests},
                              {"saturated", r.saturated}});
            log_kv("bench_level", {{"target_rps", std::to_string(r.target_rps)},
                                   {"achieved_rps", std::to_string(r.achieved_rps)},
                                   {"p99_ms", std::to_string(r.p99_ms)},
                                   {"saturated", r.saturated ? "true" : "false"}});
        }
        std::ofstream(bn_report) << report.dump(2) << '\n';
        write_config_sidecar(bn_report, resolved);
        return 0;
    }

    if (*gb_cmd) {
        using ClockT = std::chrono::steady_clock;
        if (gb_mode == "alsh") {
            Rng rng(gb_seed);
            std::vector<std::pair<std::int64_t, Vec>> corpus;
            corpus.reserve(gb_n);
            for (int i = 0; i < gb_n; ++i) {
                Vec v(gb_dim);
                for (auto& x : v) x = rng.normal();
                corpus.emplace_back(i, std::move(v));
            }
            AlshConfig cfg = gb_alsh;
            cfg.seed = gb_seed + 1;
            const AlshIndex index = AlshIndex::build(corpus, cfg);
            double recall_sum = 0.0;
            std::vector<double> lat_us;
            std::size_t cand_sum = 0;
            for (int qi = 0; qi < gb_queries; ++qi) {
                Vec q(gb_dim);
                for (auto& x : q) x = rng.normal();
                // brute-force oracle
                std::vector<std::pair<double, std::int64_t>> exact;
                exact.reserve(gb_n);
                for (const auto& [id, v] : corpus) exact.emplace_back(dot(q, v), id);
                std::partial_sort(exact.begin(), exact.begin() + gb_k, exact.end(),
                                  std::greater<>());
                AlshQueryStats stats;
                const auto t0 = ClockT::now();
                const auto got = index.query(q, static_cast<std::size_t>(gb_k), &stats);
                const auto t1 = ClockT::now();
                lat_us.push_back(
                    std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0);
                std::set<std::int64_t> truth;
                for (int i = 0; i < gb_k; ++i) truth.insert(exact[i].second);
                std::size_t hit = 0;
                for (const auto& [id, score] : got) hit += truth.count(id);
                recall_sum += static_cast<double>(hit) / static_cast<double>(gb_k);
                cand_sum += stats.candidates;
            }
            std::sort(lat_us.begin(), lat_us.end());
            json j;
            j["mode"] = "alsh";
            j["n"] = gb_n;
            j["dim"] = gb_dim;
            j["k"] = gb_k;
            j["queries"] = gb_queries;
            j["mean_recall"] = recall_sum / gb_queries;
            j["mean_candidates"] = static_cast<double>(cand_sum) / gb_queries;
            j["p50_query_us"] = lat_us[lat_us.size() / 2];
            j["p99_query_us"] = lat_us[static_cast<std::size_t>(0.99 * (lat_us.size() - 1))];
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (gb_mode == "hard") {
            if (gb_corpus.empty()) {
                std::cerr << "error: --corpus (UBT index path) required in hard mode\n";
                return 2;
            }
            const UserBehaviorTree tree = UserBehaviorTree::load(gb_corpus);
            std::vector<std::pair<std::int64_t, std::int64_t>> probes;
            for (const auto& [uid, node] : tree.users())
                for (const auto& [cid, list] : node.by_category) probes.emplace_back(uid, cid);
            if (probes.empty()) {
                std::cerr << "error: empty index\n";
                return 1;
            }
            Rng rng(gb_seed);
            std::vector<double> lat_us;
            for (int qi = 0; qi < gb_queries; ++qi) {
                const auto& [uid, cid] = probes[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(probes.size()) - 1))];
                const auto t0 = ClockT::now();
                const auto seq = tree.query(uid, cid, static_cast<std::size_t>(gb_k));
                const auto t1 = ClockT::now();
                lat_us.push_back(
                    std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0 +
                    seq.size() * 0.0);
            }
            std::sort(lat_us.begin(), lat_us.end());
            json j;
            j["mode"] = "hard";
            j["k"] = gb_k;
            j["queries"] = gb_queries;
            j["p50_query_us"] = lat_us[lat_us.size() / 2];
            j["p99_query_us"] = lat_us[static_cast<std::size_t>(0.99 * (lat_us.size() - 1))];
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        // soft: exact soft-search vs ALSH over projected per-user vectors
        if (gb_corpus.empty() || gb_ckpt.empty()) {
            std::cerr << "error: --corpus (behaviors.tsv) and --ckpt required in soft mode\n";
            return 2;
        }
        const SimModel model = SimModel::load_checkpoint(gb_ckpt);
        const auto behaviors = load_behaviors_tsv(gb_corpus);
        std::map<std::int64_t, BehaviorSequence> by_user;
        std::int64_t max_ts = 0;
        for (const auto& [uid, b] : behaviors) {
            by_user[uid].behaviors.push_back(b);
            max_ts = std::max(max_ts, b.timestamp);
        }
        std::vector<std::int64_t> users;
        for (auto& [uid, seq] : by_user) {
            std::stable_sort(seq.behaviors.begin(), seq.behaviors.end(),
                             [](const Behavior& a, const Behavior& b) {
                                 return a.timestamp < b.timestamp;
                             });
            if (seq.size() >= static_cast<std::size_t>(2 * gb_k)) users.push_back(uid);
        }
        if (users.empty()) {
            std::cerr << "error: no user has at least 2k behaviors\n";
            return 1;
        }
        Rng rng(gb_seed);
        double recall_sum = 0.0;
        std::vector<double> exact_us, alsh_us;
        int done = 0;
        std::map<std::int64_t, AlshIndex> index_cache;
        for (int qi = 0; qi < gb_queries; ++qi) {
            const std::int64_t uid = users[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(users.size()) - 1))];
            const auto& seq = by_user[uid];
            const auto& probe =
                seq[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seq.size()) - 1))];
            const CandidateItem cand{probe.item_id, probe.category_id, max_ts + 86400};

            const auto t0 = ClockT::now();
            const BehaviorSequence exact =
                soft_search_exact(seq, cand, model, static_cast<std::size_t>(gb_k));
            const auto t1 = ClockT::now();
            exact_us.push_back(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0);

            auto idx_it = index_cache.find(uid);
            if (idx_it == index_cache.end()) {
                std::vector<std::pair<std::int64_t, Vec>> vecs;
                vecs.reserve(seq.size());
                for (std::size_t i = 0; i < seq.size(); ++i)
                    vecs.emplace_back(static_cast<std::int64_t>(i),
                                      matvec(model.gsu.w_b, behavior_embedding(model, seq[i])));
                AlshConfig acfg;
                acfg.seed = gb_seed + 7;
                idx_it = index_cache.emplace(uid, AlshIndex::build(vecs, acfg)).first;
            }
            const Vec query = matvec(model.gsu.w_a, gsu_candidate_embedding(model, cand));
            const auto t2 = ClockT::now();
            const auto got = idx_it->second.query(query, static_cast<std::size_t>(gb_k));
            const auto t3 = ClockT::now();
            alsh_us.push_back(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t3 - t2).count() / 1000.0);

            std::set<std::int64_t> truth;
            for (const auto& b : exact.behaviors) {
                for (std::size_t i = 0; i < seq.size(); ++i)
                    if (seq[i].item_id == b.item_id && seq[i].timestamp == b.timestamp)
                        truth.insert(static_cast<std::int64_t>(i));
            }
            std::size_t hit = 0;
            for (const auto& [id, score] : got) hit += truth.count(id);
            recall_sum += static_cast<double>(hit) / static_cast<double>(gb_k);
            ++done;
        }
        std::sort(exact_us.begin(), exact_us.end());
        std::sort(alsh_us.begin(), alsh_us.end());
        json j;
        j["mode"] = "soft";
        j["k"] = gb_k;
        j["queries"] = done;
        j["mean_recall_alsh_vs_exact"] = recall_sum / done;
        j["p50_exact_us"] = exact_us[exact_us.size() / 2];
        j["p50_alsh_us"] = alsh_us[alsh_us.size() / 2];
        std::cout << j.dump(2) << '\n';
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
