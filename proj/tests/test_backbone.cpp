#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "beex/model.hpp"

using namespace beex;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.vocab_size = 20;
    c.classes = 2;
    c.blocks = 3;
    c.heads = 2;
    c.width = 8;
    c.hidden = 6;
    c.max_len = 5;
    c.dropout = 0.0;
    c.seed = 42;
    return c;
}

TokenSequence seq_of(std::vector<int> ids, std::size_t true_len) {
    TokenSequence s;
    s.ids = std::move(ids);
    s.true_length = true_len;
    return s;
}

}  // namespace

TEST_CASE("single-position attention returns its own value row") {
    // With L=1 the softmax over one column is 1, so the head output equals
    // b(x) b(Wv) regardless of the query/key contents.
    std::mt19937_64 rng(1);
    const std::size_t d = 4, dh = 2;
    Tensor x = Tensor::uniform({1, d}, -1, 1, rng);
    Parameter wq{"wq", Tensor::uniform({d, dh}, -1, 1, rng), true};
    Parameter wk{"wk", Tensor::uniform({d, dh}, -1, 1, rng), true};
    Parameter wv{"wv", Tensor::uniform({d, dh}, -1, 1, rng), true};
    std::vector<std::uint8_t> mask = {0};
    Tensor out = self_attention_head(binarize(x), wq, wk, wv, mask, d,
                                     Binarizer::SecondOrder, 0.0, nullptr, false);
    Tensor expect = matmul(binarize(x), binarize(wv.value));
    REQUIRE(out.size() == expect.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-12));
}

TEST_CASE("attention with all but one column masked collapses to that value row") {
    std::mt19937_64 rng(2);
    const std::size_t L = 4, d = 4, dh = 2;
    Tensor x = Tensor::uniform({L, d}, -1, 1, rng);
    Parameter wq{"wq", Tensor::uniform({d, dh}, -1, 1, rng), true};
    Parameter wk{"wk", Tensor::uniform({d, dh}, -1, 1, rng), true};
    Parameter wv{"wv", Tensor::uniform({d, dh}, -1, 1, rng), true};
    std::vector<std::uint8_t> mask = {0, 1, 1, 1};  // only position 0 attendable
    Tensor out = self_attention_head(binarize(x), wq, wk, wv, mask, d,
                                     Binarizer::SecondOrder, 0.0, nullptr, false);
    Tensor v = matmul(binarize(x), binarize(wv.value));
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < dh; ++j)
            CHECK(out.at(i, j) == doctest::Approx(v.at(0, j)).epsilon(1e-12));
}

TEST_CASE("multi-head attention is invariant to order of identical heads") {
    // Two heads with identical weights must give the same output as one
    // head's result written through both slices of Wo.
    std::mt19937_64 rng(3);
    ModelConfig cfg = tiny_config();
    cfg.heads = 2;
    Model m(cfg);
    BlockParams& b = m.blocks[0];
    // Copy head 0's weights into head 1.
    for (auto* mats : {&b.wq, &b.wk, &b.wv})
        (*mats)[1].value.mutable_data() = (*mats)[0].value.data();
    Tensor x = Tensor::uniform({3, cfg.width}, -1, 1, rng);
    std::vector<std::uint8_t> mask = {0, 0, 0};
    Tensor out = multi_head_attention(x, b, mask, cfg, false, nullptr);
    // Independently: concat two copies of the head output, times b(Wo).
    Tensor head = self_attention_head(binarize(x), b.wq[0], b.wk[0], b.wv[0], mask, cfg.width,
                                      cfg.binarizer, 0.0, nullptr, false);
    Tensor cat = concat_cols({head, head});
    Tensor expect = matmul(binarize(cat), binarize(b.wo.value));
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-10));
}

TEST_CASE("SLFN literal update with zero weights gives h = b(1/2) + b(1/2)*b(0)") {
    // Zero weights: Sg = sigmoid(0) = 1/2, Tg = tanh(0) = 0. Literal rule
    // h = b(Sg) + b(Sg) o b(Tg) = b(0.5) = 0.75 in every coordinate.
    const std::size_t d = 3, dh = 4;
    Tensor x = Tensor::zeros({1, d});
    Tensor h0 = Tensor::zeros({1, dh});
    Tensor wz = Tensor::zeros({d, dh});
    Tensor uz = Tensor::zeros({dh, dh});
    Tensor h = slfn_step(x, h0, wz, uz, wz, uz, uz, SlfnRule::Literal,
                         Binarizer::SecondOrder);
    for (std::size_t j = 0; j < dh; ++j) CHECK(h.at(0, j) == doctest::Approx(0.75));
}

TEST_CASE("SLFN literal step matches a scalar hand-unroll") {
    // 1-d case, all weights = 0.3, x = 1, h_prev = 0.5. The step binarizes
    // its inputs before the gate matmuls.
    const double w = 0.3, x = 1.0, hp = 0.5;
    auto b = [](double r) { return binarize_scalar(r); };
    const double pre = b(x) * w + b(hp) * w;
    const double sg = 1.0 / (1.0 + std::exp(-pre));
    const double tg = std::tanh(pre);
    const double expect = b(sg) + b(sg) * b(tg);
    Tensor xt = Tensor::from({1, 1}, {x});
    Tensor ht = Tensor::from({1, 1}, {hp});
    Tensor wt = Tensor::from({1, 1}, {w});
    Tensor h = slfn_step(xt, ht, wt, wt, wt, wt, wt, SlfnRule::Literal,
                         Binarizer::SecondOrder);
    CHECK(h.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("SLFN corrected rule keeps a forget path through the previous state") {
    const double w = 0.3, x = 1.0, hp = 0.5;
    auto b = [](double r) { return binarize_scalar(r); };
    const double pre = b(x) * w + b(hp) * w;
    const double sg = 1.0 / (1.0 + std::exp(-pre));
    const double tg = std::tanh(pre);
    const double sh = 1.0 / (1.0 + std::exp(-(b(hp) * w)));
    const double expect = b(sh) * b(hp) + b(sg) * b(tg);
    Tensor xt = Tensor::from({1, 1}, {x});
    Tensor ht = Tensor::from({1, 1}, {hp});
    Tensor wt = Tensor::from({1, 1}, {w});
    Tensor h = slfn_step(xt, ht, wt, wt, wt, wt, wt, SlfnRule::Corrected,
                         Binarizer::SecondOrder);
    CHECK(h.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("block keeps sequence shape and masks do not leak pads into pooling") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TokenSequence s = seq_of({3, 7, 0, 0, 0}, 2);
    EmbeddedSequence e = m.embed_input(s);
    REQUIRE(e.values.rows() == cfg.max_len);
    REQUIRE(e.values.cols() == cfg.width);
    Tensor h = m.block_forward(0, e.values, e.pad_mask, false, nullptr);
    CHECK(h.rows() == cfg.max_len);
    CHECK(h.cols() == cfg.width);
}

TEST_CASE("pad tail never influences real-token logits") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TokenSequence a = seq_of({3, 7, 0, 0, 0}, 2);
    TokenSequence b = seq_of({3, 7, 0, 0, 0}, 2);
    InferResult ra = m.infer_with_exit(a, 0.0, false);
    // Same tokens, same pads: a second run must be identical (dropout off),
    // and prepending extra pad ids beyond true_length must change nothing.
    InferResult rb = m.infer_with_exit(b, 0.0, false);
    REQUIRE(ra.trace.logits.size() == rb.trace.logits.size());
    for (std::size_t i = 0; i < ra.trace.logits.size(); ++i)
        CHECK(ra.trace.logits[i] == rb.trace.logits[i]);
}

TEST_CASE("first blocks compute identical hiddens regardless of total depth") {
    ModelConfig c2 = tiny_config();
    c2.blocks = 2;
    ModelConfig c3 = tiny_config();
    c3.blocks = 3;
    Model m2(c2), m3(c3);
    // Same seed: the shared prefix of parameters must coincide, so the
    // block-0 and block-1 hidden states agree between the two depths.
    TokenSequence s = seq_of({1, 2, 3, 0, 0}, 3);
    auto h2 = m2.backbone_forward(m2.embed_input(s), false, nullptr);
    auto h3 = m3.backbone_forward(m3.embed_input(s), false, nullptr);
    REQUIRE(h2.size() == 2);
    REQUIRE(h3.size() == 3);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < h2[c].size(); ++i)
            CHECK(h2[c].data()[i] == doctest::Approx(h3[c].data()[i]).epsilon(1e-12));
}

TEST_CASE("gradient reaches every latent and full-precision parameter") {
    ModelConfig cfg = tiny_config();
    cfg.blocks = 2;
    Model m(cfg);
    TokenSequence s = seq_of({3, 7, 9, 0, 0}, 3);
    auto hiddens = m.backbone_forward(m.embed_input(s), false, nullptr);
    Tensor loss = Tensor::scalar(0.0);
    for (std::size_t c = 0; c < hiddens.size(); ++c) {
        EmbeddedSequence e = m.embed_input(s);
        Tensor z = m.head_forward(c, hiddens[c], e.pad_mask);
        loss = add(loss, cross_entropy(z, 1));
    }
    for (auto* p : m.parameters()) p->value.zero_grad();
    backward(loss);
    for (auto* p : m.parameters()) {
        double norm = 0;
        for (double g : p->value.grad()) norm += std::abs(g);
        INFO("parameter ", p->name);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("embedding pad row gets zero gradient from the full model loss") {
    ModelConfig cfg = tiny_config();
    Model m(cfg);
    TokenSequence s = seq_of({3, 7, 0, 0, 0}, 2);
    InferResult unused = m.infer_with_exit(s, 0.0, false);
    (void)unused;
    auto hiddens = m.backbone_forward(m.embed_input(s), false, nullptr);
    EmbeddedSequence e = m.embed_input(s);
    Tensor z = m.head_forward(cfg.blocks - 1, hiddens.back(), e.pad_mask);
    m.embedding.value.zero_grad();
    backward(cross_entropy(z, 0));
    for (std::size_t d = 0; d < m.embedding.value.cols(); ++d)
        CHECK(m.embedding.value.grad()[d] == 0.0);
}

TEST_CASE("seeded construction is deterministic") {
    ModelConfig cfg = tiny_config();
    Model a(cfg), b(cfg);
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value.data() == pb[i]->value.data());
    }
}
