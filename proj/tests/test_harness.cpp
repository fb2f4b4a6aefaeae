#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "beex/checkpoint.hpp"
#include "beex/report.hpp"

using namespace beex;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.vocab_size = 40;
    c.classes = 2;
    c.blocks = 3;
    c.heads = 2;
    c.width = 8;
    c.hidden = 6;
    c.max_len = 6;
    c.dropout = 0.0;
    c.seed = 33;
    return c;
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("flops ledgers compose: early exit at block c costs embedding + c*(block+head)") {
    ModelConfig cfg = tiny_config();
    const FlopsLedger emb = embedding_flops(cfg);
    const FlopsLedger blk = block_flops(cfg);
    const FlopsLedger hd = head_flops(cfg);
    for (std::size_t c = 1; c <= cfg.blocks; ++c) {
        const FlopsLedger ee = count_flops(cfg, c);
        CHECK(ee.nominal() ==
              doctest::Approx(emb.nominal() + c * (blk.nominal() + hd.nominal())));
        CHECK(ee.adjusted() ==
              doctest::Approx(emb.adjusted() + c * (blk.adjusted() + hd.adjusted())));
    }
    const FlopsLedger full = count_flops_full(cfg);
    CHECK(full.nominal() ==
          doctest::Approx(emb.nominal() + cfg.blocks * blk.nominal() + hd.nominal()));
}

TEST_CASE("adjusted total discounts exactly the binary matmul share by 64x") {
    ModelConfig cfg = tiny_config();
    const FlopsLedger blk = block_flops(cfg);
    CHECK(blk.binary > 0);
    CHECK(blk.binary <= blk.nominal());
    CHECK(blk.adjusted() == doctest::Approx(blk.nominal() - blk.binary * 63.0 / 64.0));
}

TEST_CASE("parameter counts: per-block hand count at a tiny scale") {
    ModelConfig cfg = tiny_config();  // D=8 Dh=6 H=2, literal rule
    const std::size_t D = 8, Dh = 6, H = 2, dh = 4;
    // qkv per head + output proj + gates + recurrences + projection + 2 norms
    const std::uint64_t expect = H * 3 * D * dh + D * D + 2 * D * Dh + 2 * Dh * Dh + Dh * D +
                                 4 * D;
    CHECK(params_per_block(cfg) == expect);
    const std::uint64_t head_expect = D * cfg.exit_hidden() + cfg.exit_hidden() * 2 + 2;
    CHECK(params_per_head(cfg) == head_expect);
}

TEST_CASE("parameters saved by an exit scales with skipped blocks") {
    ModelConfig cfg = tiny_config();
    CHECK(parameters_saved(cfg, cfg.blocks) == 0);
    CHECK(parameters_saved(cfg, 1) == 2 * params_per_block(cfg));
    CHECK(parameters_saved(cfg, 2) == 1 * params_per_block(cfg));
}

TEST_CASE("latent checkpoint round-trips every parameter bit-exactly at f32") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TempFile f("latent_rt.ckpt");
    save_latent(m, f.path);
    Model n = load_latent(f.path);
    auto pm = m.parameters();
    auto pn = n.parameters();
    REQUIRE(pm.size() == pn.size());
    for (std::size_t i = 0; i < pm.size(); ++i) {
        CHECK(pm[i]->name == pn[i]->name);
        REQUIRE(pm[i]->value.size() == pn[i]->value.size());
        for (std::size_t j = 0; j < pm[i]->value.size(); ++j)
            CHECK(static_cast<float>(pm[i]->value.at(j)) ==
                  static_cast<float>(pn[i]->value.at(j)));
    }
    CHECK(peek_checkpoint(f.path).format == "beex-latent");
}

TEST_CASE("frozen checkpoint round-trip reproduces identical inference") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    FrozenModel fm = FrozenModel::from(m);
    TempFile f("frozen_rt.ckpt");
    save_frozen(fm, f.path);
    FrozenModel fl = load_frozen(f.path);
    TokenSequence s;
    s.ids = {1, 5, 9, 0, 0, 0};
    s.true_length = 3;
    InferResult a = fm.infer(s, 1e-4, true, true);
    InferResult b = fl.infer(s, 1e-4, true, true);
    CHECK(a.trace.logits == b.trace.logits);
    CHECK(a.trace.exit_index == b.trace.exit_index);
}

TEST_CASE("re-saving a loaded frozen checkpoint is byte-identical") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TempFile f1("frozen_a.ckpt"), f2("frozen_b.ckpt");
    save_frozen(FrozenModel::from(m), f1.path);
    save_frozen(load_frozen(f1.path), f2.path);
    std::ifstream a(f1.path, std::ios::binary), b(f2.path, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("size ledger counts frozen bits against a full-precision baseline") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TempFile f("size.ckpt");
    save_frozen(FrozenModel::from(m), f.path);
    SizeLedger led = measure_size(f.path);
    // Binarized scalars: every latent matrix; fp: embedding + norms + biases.
    std::uint64_t bin = 0, fp = 0;
    for (auto* p : m.parameters()) (p->binarized ? bin : fp) += p->value.size();
    CHECK(led.binary_params == bin);
    CHECK(led.fp_params == fp);
    CHECK(led.ratio() > 1.0);
    CHECK(led.ratio() < 32.0);
}

TEST_CASE("tsv reader addresses columns by header name and checks labels") {
    TempFile f("data_rt.tsv");
    {
        std::ofstream out(f.path);
        out << "label\tsentence\n1\thello world\n0\tbye\n";
    }
    TsvSchema schema;
    auto recs = read_tsv(f.path, schema);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].text == "hello world");
    CHECK(recs[0].label == 1);
    CHECK(recs[1].label == 0);
}

TEST_CASE("tsv reader rejects missing columns and bad labels with line numbers") {
    TempFile f("data_bad.tsv");
    {
        std::ofstream out(f.path);
        out << "sentence\tlabel\nhello\tnope\n";
    }
    TsvSchema schema;
    CHECK_THROWS_AS(read_tsv(f.path, schema), data_error);
    TempFile g("data_nocol.tsv");
    {
        std::ofstream out(g.path);
        out << "wrongcol\tlabel\nhello\t1\n";
    }
    CHECK_THROWS_AS(read_tsv(g.path, schema), data_error);
}

TEST_CASE("write_tsv and read_tsv round-trip, pair columns included") {
    TsvSchema schema{"sentence1", std::string("sentence2"), "label"};
    std::vector<RawRecord> recs = {{"a b", std::string("c"), 1}, {"d", std::string("e f"), 0}};
    TempFile f("pair_rt.tsv");
    write_tsv(f.path, recs, schema);
    auto back = read_tsv(f.path, schema);
    REQUIRE(back.size() == 2);
    CHECK(back[0].text == "a b");
    CHECK(*back[0].text2 == "c");
    CHECK(back[1].label == 0);
}

TEST_CASE("synthetic sentiment corpus is deterministic and label-consistent") {
    auto a = synth_sentiment(99, 50);
    auto b = synth_sentiment(99, 50);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].text == b[i].text);
        CHECK(a[i].label == b[i].label);
    }
    auto c = synth_sentiment(100, 50);
    bool differs = false;
    for (std::size_t i = 0; i < c.size(); ++i) differs |= c[i].text != a[i].text;
    CHECK(differs);
}

TEST_CASE("synthetic entailment pairs carry a second sentence") {
    auto recs = synth_entailment(5, 20);
    REQUIRE(recs.size() == 20);
    std::size_t pos = 0;
    for (const auto& r : recs) {
        REQUIRE(r.text2.has_value());
        pos += r.label;
    }
    CHECK(pos > 0);
    CHECK(pos < 20);
}

TEST_CASE("model config json round-trip") {
    ModelConfig cfg = tiny_config();
    cfg.binarizer = Binarizer::Clip;
    cfg.slfn_rule = SlfnRule::Corrected;
    ModelConfig back = model_config_from_json(model_config_to_json(cfg));
    CHECK(back.vocab_size == cfg.vocab_size);
    CHECK(back.blocks == cfg.blocks);
    CHECK(back.width == cfg.width);
    CHECK(back.binarizer == Binarizer::Clip);
    CHECK(back.slfn_rule == SlfnRule::Corrected);
}

TEST_CASE("run_eval histogram accounts for every sample") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    FrozenModel fm = FrozenModel::from(m);
    Dataset d{"synthetic", {}};
    std::mt19937_64 rng(3);
    for (int i = 0; i < 12; ++i) {
        Sample s;
        s.seq.ids.assign(cfg.max_len, 0);
        const std::size_t len = 2 + rng() % 4;
        for (std::size_t j = 0; j < len; ++j) s.seq.ids[j] = 1 + rng() % cfg.vocab_size;
        s.seq.true_length = len;
        s.label = static_cast<int>(rng() % 2);
        d.samples.push_back(std::move(s));
    }
    RunReport rep = run_eval(fm, d, 1e-3, Metric::Accuracy, true);
    std::size_t total = 0;
    for (auto n : rep.exit_histogram) total += n;
    CHECK(total == d.size());
    CHECK(rep.samples == d.size());
    CHECK(rep.flops_wee == doctest::Approx(count_flops_full(cfg).adjusted()));
    CHECK(rep.mean_exit_depth >= 1.0);
    CHECK(rep.mean_exit_depth <= cfg.blocks);
}
