#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "oracles.hpp"
#include "sim/io.hpp"
#include "sim/model.hpp"

using namespace sim;

namespace {

ModelConfig ckpt_cfg() {
    ModelConfig cfg;
    cfg.item_vocab = 40;
    cfg.cat_vocab = 12;
    cfg.heads = 3;
    cfg.mode = GsuMode::kSoft;
    cfg.alpha = 1.0;
    cfg.init_seed = 77;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("config invariants") {
    ModelConfig cfg = ckpt_cfg();
    cfg.mode = GsuMode::kHard;
    cfg.alpha = 0.5;
    CHECK_THROWS_AS(SimModel::init(cfg), std::invalid_argument);  // hard mode needs alpha 0
    cfg.alpha = 0.0;
    CHECK_NOTHROW(SimModel::init(cfg));
}

TEST_CASE("embedding OOV row") {
    const SimModel m = SimModel::init(ckpt_cfg());
    CHECK(m.item_emb.row_of(-1) == 0);
    CHECK(m.item_emb.row_of(40) == 0);
    CHECK(m.item_emb.row_of(0) == 1);
    CHECK(m.item_emb.lookup(-1) == m.item_emb.lookup(99999));
}

TEST_CASE("checkpoint round trip: quantization fixed point and forward equality") {
    const std::string a_path = "/tmp/sim_ckpt_a.bin";
    const std::string b_path = "/tmp/sim_ckpt_b.bin";
    const SimModel m1 = SimModel::init(ckpt_cfg());
    m1.save_checkpoint(a_path);
    const SimModel m2 = SimModel::load_checkpoint(a_path);
    m2.save_checkpoint(b_path);
    // a float32 round trip of float32-valued parameters is lossless
    CHECK(slurp(a_path) == slurp(b_path));

    const SimModel m3 = SimModel::load_checkpoint(b_path);
    Rng rng(3);
    const TrainingSample s = oracles::random_sample(rng, 40, 12, 12, 4);
    const BehaviorSequence sbs = hard_filter(s.long_seq, s.candidate, 200);
    CHECK(esu_forward(sbs, s.short_seq, s.candidate, m2) ==
          esu_forward(sbs, s.short_seq, s.candidate, m3));
    CHECK(gsu_aux_forward(s.long_seq, s.candidate, m2).p_click ==
          gsu_aux_forward(s.long_seq, s.candidate, m3).p_click);

    // config survives
    CHECK(m2.cfg.heads == 3);
    CHECK(m2.cfg.mode == GsuMode::kSoft);
    CHECK(m2.cfg.item_vocab == 40);

    std::remove(a_path.c_str());
    std::remove(b_path.c_str());
}

TEST_CASE("checkpoint corruption and version errors") {
    const std::string path = "/tmp/sim_ckpt_corrupt.bin";
    SimModel::init(ckpt_cfg()).save_checkpoint(path);

    std::string bytes = slurp(path);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    }
    CHECK_THROWS_AS(SimModel::load_checkpoint(path), ChecksumError);

    // flip the version digit and rewrite a valid checksum
    bytes[7] = '9';
    {
        std::string core = bytes.substr(0, bytes.size() - 8);
        Fnv1a64 sum;
        sum.update(core.data(), core.size());
        const std::uint64_t digest = sum.digest();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(core.data(), static_cast<std::streamsize>(core.size()));
        for (int i = 0; i < 8; ++i) out.put(static_cast<char>(digest >> (8 * i)));
    }
    CHECK_THROWS_AS(SimModel::load_checkpoint(path), FormatVersionError);
    std::remove(path.c_str());
}

TEST_CASE("dense parameter registry covers every tensor exactly once") {
    SimModel m = SimModel::init(ckpt_cfg());
    const auto params = m.dense_params();
    std::size_t total = 0;
    std::set<std::string> names;
    for (const auto& t : params) {
        CHECK(names.insert(t.name).second);
        total += t.size;
    }
    // embeddings + gsu (w_b, w_a, mlp) + esu (heads, mlp, no-history)
    std::size_t expect = m.item_emb.raw().size() + m.cat_emb.raw().size() +
                         m.time_emb.raw().size();
    expect += m.gsu.w_b.a.size() + m.gsu.w_a.a.size();
    for (const auto& w : m.gsu.aux_mlp.w) expect += w.a.size();
    for (const auto& b : m.gsu.aux_mlp.b) expect += b.size();
    for (int h = 0; h < m.esu.heads; ++h)
        expect += m.esu.w_b[h].a.size() + m.esu.w_a[h].a.size();
    for (const auto& w : m.esu.mlp.w) expect += w.a.size();
    for (const auto& b : m.esu.mlp.b) expect += b.size();
    expect += m.esu.no_history_z.size() + m.esu.no_history_short.size();
    CHECK(total == expect);
}
