#include "sim/model.hpp"

#include <nlohmann/json.hpp>

#include "sim/io.hpp"

namespace sim {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'I', 'M', 'C', 'K', 'P', 'T', '1'};
}

void ModelConfig::validate() const {
    if (embed_dim <= 0) throw std::invalid_argument("config: embed_dim must be positive");
    if (use_time && time_dim <= 0)
        throw std::invalid_argument("config: time_dim must be positive when time embeddings are on");
    if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
    if (sbs_k < 1) throw std::invalid_argument("config: sbs_k must be >= 1");
    if (short_len < 0) throw std::invalid_argument("config: short_len must be >= 0");
    if (item_vocab < 0 || cat_vocab < 0) throw std::invalid_argument("config: negative vocab");
    if (mode == GsuMode::kHard && alpha != 0.0)
        throw std::invalid_argument("config: hard mode requires alpha = 0");
    buckets.validate();
}

SimModel SimModel::init(const ModelConfig& cfg_in) {
    ModelConfig cfg = cfg_in;
    cfg.validate();
    SimModel m;
    m.cfg = cfg;
    Rng rng(cfg.init_seed);
    const int d = cfg.embed_dim;
    const int dz = cfg.z_dim();

    m.item_emb = EmbeddingTable(cfg.item_vocab, d, cfg.init_scale, rng);
    m.cat_emb = EmbeddingTable(cfg.cat_vocab, d, cfg.init_scale, rng);
    m.time_emb = EmbeddingTable(cfg.use_time ? cfg.buckets.bucket_count() : 0,
                                cfg.use_time ? cfg.time_dim : 1, cfg.init_scale, rng);

    m.gsu.w_b = Mat::xavier(d, d, rng);
    // W_a starts equal to W_b: the initial relevance is then a positive
    // semidefinite self-similarity form, so a vector scores itself highest.
    m.gsu.w_a = m.gsu.w_b;
    m.gsu.aux_mlp = Mlp({cfg.aux_input_dim(), 200, 80, 2}, rng);

    m.esu.heads = cfg.heads;
    for (int h = 0; h < cfg.heads; ++h) {
        m.esu.w_b.push_back(Mat::xavier(dz, dz, rng));
        m.esu.w_a.push_back(Mat::xavier(dz, 2 * d, rng));
    }
    m.esu.mlp = Mlp({cfg.esu_input_dim(), 200, 80, 2}, rng);
    m.esu.no_history_z.resize(dz);
    for (auto& x : m.esu.no_history_z) x = (rng.uniform() * 2.0 - 1.0) * cfg.init_scale;
    m.esu.no_history_short.resize(d);
    for (auto& x : m.esu.no_history_short) x = (rng.uniform() * 2.0 - 1.0) * cfg.init_scale;
    return m;
}

static void collect_mlp(std::vector<TensorRef>& out, const std::string& prefix, Mlp& mlp) {
    for (std::size_t l = 0; l < mlp.w.size(); ++l) {
        out.push_back({prefix + ".w" + std::to_string(l), mlp.w[l].a.data(), mlp.w[l].a.size()});
        out.push_back({prefix + ".b" + std::to_string(l), mlp.b[l].data(), mlp.b[l].size()});
    }
}

std::vector<TensorRef> SimModel::dense_params() {
    std::vector<TensorRef> out;
    out.push_back({"embedding.item", item_emb.raw().data(), item_emb.raw().size()});
    out.push_back({"embedding.category", cat_emb.raw().data(), cat_emb.raw().size()});
    if (cfg.use_time)
        out.push_back({"embedding.time", time_emb.raw().data(), time_emb.raw().size()});
    out.push_back({"gsu.w_b", gsu.w_b.a.data(), gsu.w_b.a.size()});
    out.push_back({"gsu.w_a", gsu.w_a.a.data(), gsu.w_a.a.size()});
    collect_mlp(out, "gsu.aux_mlp", gsu.aux_mlp);
    for (int h = 0; h < esu.heads; ++h) {
        out.push_back({"esu.head" + std::to_string(h) + ".w_b", esu.w_b[h].a.data(),
                       esu.w_b[h].a.size()});
        out.push_back({"esu.head" + std::to_string(h) + ".w_a", esu.w_a[h].a.data(),
                       esu.w_a[h].a.size()});
    }
    collect_mlp(out, "esu.mlp", esu.mlp);
    out.push_back({"esu.no_history_z", esu.no_history_z.data(), esu.no_history_z.size()});
    out.push_back({"esu.no_history_short", esu.no_history_short.data(), esu.no_history_short.size()});
    return out;
}

std::vector<TensorRef> SimModel::dense_params() const {
    return const_cast<SimModel*>(this)->dense_params();
}

static json config_to_json(const ModelConfig& c) {
    json j;
    j["embed_dim"] = c.embed_dim;
    j["time_dim"] = c.time_dim;
    j["use_time"] = c.use_time;
    j["heads"] = c.heads;
    j["sbs_k"] = c.sbs_k;
    j["short_len"] = c.short_len;
    j["mode"] = to_string(c.mode);
    j["variant"] = to_string(c.variant);
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["lr0"] = c.lr0;
    j["lr_decay"] = c.lr_decay;
    j["aux_sample_max"] = c.aux_sample_max;
    j["item_vocab"] = c.item_vocab;
    j["cat_vocab"] = c.cat_vocab;
    j["init_seed"] = c.init_seed;
    j["init_scale"] = c.init_scale;
    j["bucket_boundaries"] = c.buckets.boundaries;
    return j;
}

static ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.time_dim = j.at("time_dim").get<int>();
    c.use_time = j.at("use_time").get<bool>();
    c.heads = j.at("heads").get<int>();
    c.sbs_k = j.at("sbs_k").get<int>();
    c.short_len = j.at("short_len").get<int>();
    c.mode = gsu_mode_from_string(j.at("mode").get<std::string>());
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.lr0 = j.at("lr0").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.aux_sample_max = j.at("aux_sample_max").get<int>();
    c.item_vocab = j.at("item_vocab").get<std::int64_t>();
    c.cat_vocab = j.at("cat_vocab").get<std::int64_t>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.init_scale = j.at("init_scale").get<double>();
    c.buckets = TimeDeltaBuckets(j.at("bucket_boundaries").get<std::vector<double>>());
    return c;
}

void SimModel::save_checkpoint(const std::string& path) const {
    BinaryWriter w(path);
    w.write_bytes(kMagic, sizeof kMagic);
    w.write_string(config_to_json(cfg).dump());
    const auto params = dense_params();
    w.write_u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& t : params) {
        w.write_string(t.name);
        w.write_u64(t.size);
        for (std::size_t i = 0; i < t.size; ++i)
            w.write_f32(static_cast<float>(t.data[i]));
    }
    w.finish_with_checksum();
}

SimModel SimModel::load_checkpoint(const std::string& path) {
    BinaryReader r(path);
    r.verify_checksum();
    char magic[8];
    r.read_bytes(magic, sizeof magic);
    if (std::memcmp(magic, "SIMCKPT", 7) != 0)
        throw IoError("not a checkpoint file: " + path);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatVersionError("unsupported checkpoint version in " + path);
    const ModelConfig cfg = config_from_json(json::parse(r.read_string()));
    SimModel m = SimModel::init(cfg);
    auto params = m.dense_params();
    const std::uint32_t count = r.read_u32();
    if (count != params.size())
        throw IoError("checkpoint tensor count mismatch in " + path);
    for (auto& t : params) {
        const std::string name = r.read_string();
        if (name != t.name)
            throw IoError("checkpoint tensor order mismatch: expected " + t.name + ", got " + name);
        const std::uint64_t n = r.read_u64();
        if (n != t.size) throw IoError("checkpoint tensor size mismatch for " + name);
        for (std::uint64_t i = 0; i < n; ++i)
            t.data[i] = static_cast<double>(r.read_f32());
    }
    if (!r.at_payload_end()) throw IoError("trailing bytes in checkpoint: " + path);
    return m;
}

const char* to_string(GsuMode m) { return m == GsuMode::kHard ? "hard" : "soft"; }
const char* to_string(ModelVariant v) { return v == ModelVariant::kSim ? "sim" : "avgpool"; }

GsuMode gsu_mode_from_string(const std::string& s) {
    if (s == "hard") return GsuMode::kHard;
    if (s == "soft") return GsuMode::kSoft;
    throw std::invalid_argument("unknown GSU mode: " + s);
}

ModelVariant variant_from_string(const std::string& s) {
    if (s == "sim") return ModelVariant::kSim;
    if (s == "avgpool") return ModelVariant::kAvgPool;
    throw std::invalid_argument("unknown model variant: " + s);
}

}  // namespace sim
