#include "beex/model.hpp"

#include <algorithm>
#include <cmath>

#include "beex/early_exit.hpp"
#include "beex/flops.hpp"

namespace beex {

SlfnRule slfn_rule_from_string(const std::string& s) {
    if (s == "literal") return SlfnRule::Literal;
    if (s == "corrected") return SlfnRule::Corrected;
    throw config_error("unknown SLFN rule '" + s + "' (expected literal or corrected)");
}

std::string to_string(SlfnRule r) { return r == SlfnRule::Literal ? "literal" : "corrected"; }

void ModelConfig::validate() const {
    if (vocab_size == 0) throw config_error("vocab_size must be positive");
    if (classes < 2) throw config_error("classes must be >= 2");
    if (blocks < 1) throw config_error("blocks must be >= 1");
    if (heads < 1 || width % heads != 0) throw config_error("heads must divide width");
    if (width % 2 != 0) throw config_error("width must be even (token || position halves)");
    if (max_len < 1) throw config_error("max_len must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw config_error("dropout must be in [0,1)");
}

namespace {

// Latents start uniform in [-0.5, 0.5] so b' >= 1 everywhere at init.
Parameter make_latent(const std::string& name, std::vector<std::size_t> shape,
                      std::mt19937_64& rng) {
    return {name, Tensor::uniform(std::move(shape), -0.5, 0.5, rng, true), true};
}

Parameter make_fp(const std::string& name, std::vector<std::size_t> shape, double value) {
    return {name, Tensor::full(std::move(shape), value, true), false};
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const std::size_t D = cfg_.width, Dh = cfg_.hidden, dh = cfg_.head_dim();

    // row 0 is the pad row and stays zero: pads are masked out of attention
    // and pooling, so no gradient ever reaches it
    // token embeddings start at a scale comparable to the unit-amplitude
    // positional half so neither side dominates the binarized attention
    Tensor table = Tensor::uniform({cfg_.vocab_size + 2, cfg_.embed_dim()}, -0.5, 0.5, rng, true);
    std::fill(table.mutable_data().begin(), table.mutable_data().begin() + cfg_.embed_dim(), 0.0);
    embedding = {"embedding", table, false};
    posenc_ = position_encoding(cfg_.max_len, cfg_.embed_dim());

    for (std::size_t c = 0; c < cfg_.blocks; ++c) {
        const std::string b = "block" + std::to_string(c) + ".";
        BlockParams bp;
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            const std::string hs = std::to_string(h);
            bp.wq.push_back(make_latent(b + "wq" + hs, {D, dh}, rng));
            bp.wk.push_back(make_latent(b + "wk" + hs, {D, dh}, rng));
            bp.wv.push_back(make_latent(b + "wv" + hs, {D, dh}, rng));
        }
        bp.wo = make_latent(b + "wo", {D, D}, rng);
        bp.w_sg = make_latent(b + "w_sg", {D, Dh}, rng);
        bp.w_tg = make_latent(b + "w_tg", {D, Dh}, rng);
        bp.u_sg = make_latent(b + "u_sg", {Dh, Dh}, rng);
        bp.u_tg = make_latent(b + "u_tg", {Dh, Dh}, rng);
        bp.u_sh = cfg_.share_forget_weights ? bp.u_sg : make_latent(b + "u_sh", {Dh, Dh}, rng);
        bp.proj = make_latent(b + "proj", {Dh, D}, rng);
        bp.norm1_g = make_fp(b + "norm1_g", {1, D}, 1.0);
        bp.norm1_b = make_fp(b + "norm1_b", {1, D}, 0.0);
        bp.norm2_g = make_fp(b + "norm2_g", {1, D}, 1.0);
        bp.norm2_b = make_fp(b + "norm2_b", {1, D}, 0.0);
        blocks.push_back(std::move(bp));

        const std::string e = "head" + std::to_string(c) + ".";
        ExitHeadParams hp;
        hp.w1 = make_latent(e + "w1", {D, cfg_.exit_hidden()}, rng);
        hp.w2 = make_latent(e + "w2", {cfg_.exit_hidden(), cfg_.classes}, rng);
        hp.bias = make_fp(e + "bias", {1, cfg_.classes}, 0.0);
        heads.push_back(std::move(hp));
    }
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out{&embedding};
    for (auto& b : blocks) {
        for (auto& p : b.wq) out.push_back(&p);
        for (auto& p : b.wk) out.push_back(&p);
        for (auto& p : b.wv) out.push_back(&p);
        out.push_back(&b.wo);
        if (cfg_.use_slfn) {
            out.push_back(&b.w_sg);
            out.push_back(&b.w_tg);
            out.push_back(&b.u_sg);
            out.push_back(&b.u_tg);
            // the forget gate only exists under the corrected rule
            if (cfg_.slfn_rule == SlfnRule::Corrected && !cfg_.share_forget_weights)
                out.push_back(&b.u_sh);
            out.push_back(&b.proj);
            out.push_back(&b.norm2_g);
            out.push_back(&b.norm2_b);
        }
        out.push_back(&b.norm1_g);
        out.push_back(&b.norm1_b);
    }
    for (auto& h : heads) {
        out.push_back(&h.w1);
        out.push_back(&h.w2);
        out.push_back(&h.bias);
    }
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto list = const_cast<Model*>(this)->parameters();
    return {list.begin(), list.end()};
}

EmbeddedSequence Model::embed_input(const TokenSequence& seq) const {
    return embed(seq, embedding.value, posenc_);
}

Tensor self_attention_head(const Tensor& x_bin, const Parameter& wq, const Parameter& wk,
                           const Parameter& wv, const std::vector<std::uint8_t>& pad_mask,
                           std::size_t model_width, Binarizer kind, double dropout_p,
                           std::mt19937_64* rng, bool training) {
    Tensor q = matmul(x_bin, binarize(wq.value, kind));
    Tensor k = matmul(x_bin, binarize(wk.value, kind));
    Tensor v = matmul(x_bin, binarize(wv.value, kind));
    // scaling by sqrt(D), the full model width
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(model_width)));
    Tensor probs = softmax_rows(scores, &pad_mask);
    if (training && rng) probs = dropout(probs, dropout_p, *rng, true);
    return matmul(probs, v);
}

Tensor multi_head_attention(const Tensor& x, const BlockParams& p,
                            const std::vector<std::uint8_t>& pad_mask, const ModelConfig& cfg,
                            bool training, std::mt19937_64* rng) {
    Tensor xb = binarize(x, cfg.binarizer);
    std::vector<Tensor> head_outs;
    for (std::size_t h = 0; h < cfg.heads; ++h)
        head_outs.push_back(self_attention_head(xb, p.wq[h], p.wk[h], p.wv[h], pad_mask,
                                                cfg.width, cfg.binarizer, cfg.dropout, rng,
                                                training));
    Tensor cat = concat_cols(head_outs);
    return matmul(binarize(cat, cfg.binarizer), binarize(p.wo.value, cfg.binarizer));
}

Tensor slfn_step(const Tensor& x_i, const Tensor& h_prev, const Tensor& w_sg_b,
                 const Tensor& u_sg_b, const Tensor& w_tg_b, const Tensor& u_tg_b,
                 const Tensor& u_sh_b, SlfnRule rule, Binarizer kind) {
    Tensor xb = binarize(x_i, kind);
    Tensor hb = binarize(h_prev, kind);
    Tensor sg = vsigmoid(add(matmul(xb, w_sg_b), matmul(hb, u_sg_b)));
    Tensor tg = vtanh(add(matmul(xb, w_tg_b), matmul(hb, u_tg_b)));
    Tensor learn = mul(binarize(sg, kind), binarize(tg, kind));
    if (rule == SlfnRule::Corrected) {
        Tensor sh = vsigmoid(matmul(hb, u_sh_b));
        return add(mul(binarize(sh, kind), hb), learn);
    }
    // literal printed update: b(Sg) + b(Sg) .* b(Tg)
    return add(binarize(sg, kind), learn);
}

Tensor Model::block_forward(std::size_t c, const Tensor& h,
                            const std::vector<std::uint8_t>& pad_mask, bool training,
                            std::mt19937_64* rng) const {
    const BlockParams& p = blocks.at(c);
    Tensor att = multi_head_attention(h, p, pad_mask, cfg_, training, rng);
    Tensor u = layer_norm_rows(add(h, att), p.norm1_g.value, p.norm1_b.value);
    if (!cfg_.use_slfn) return u;

    const Binarizer kind = cfg_.binarizer;
    Tensor w_sg_b = binarize(p.w_sg.value, kind);
    Tensor u_sg_b = binarize(p.u_sg.value, kind);
    Tensor w_tg_b = binarize(p.w_tg.value, kind);
    Tensor u_tg_b = binarize(p.u_tg.value, kind);
    Tensor u_sh_b = cfg_.slfn_rule == SlfnRule::Corrected ? binarize(p.u_sh.value, kind) : u_sg_b;
    Tensor proj_b = binarize(p.proj.value, kind);

    const std::size_t L = u.rows();
    Tensor state = Tensor::zeros({1, cfg_.hidden});
    std::vector<Tensor> out_rows;
    out_rows.reserve(L);
    for (std::size_t i = 0; i < L; ++i) {
        state = slfn_step(row(u, i), state, w_sg_b, u_sg_b, w_tg_b, u_tg_b, u_sh_b,
                          cfg_.slfn_rule, kind);
        out_rows.push_back(matmul(binarize(state, kind), proj_b));
    }
    Tensor s = stack_rows(out_rows);
    if (training && rng) s = dropout(s, cfg_.dropout, *rng, true);
    return layer_norm_rows(add(u, s), p.norm2_g.value, p.norm2_b.value);
}

std::vector<Tensor> Model::backbone_forward(const EmbeddedSequence& x, bool training,
                                            std::mt19937_64* rng) const {
    std::vector<Tensor> hiddens;
    Tensor h = x.values;
    for (std::size_t c = 0; c < cfg_.blocks; ++c) {
        h = block_forward(c, h, x.pad_mask, training, rng);
        hiddens.push_back(h);
    }
    return hiddens;
}

Tensor Model::head_forward(std::size_t c, const Tensor& h_c,
                           const std::vector<std::uint8_t>& pad_mask) const {
    const ExitHeadParams& p = heads.at(c);
    std::vector<std::uint8_t> keep(pad_mask.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = pad_mask[i] ? 0 : 1;
    Tensor pool = mean_rows_masked(h_c, keep);
    const Binarizer kind = cfg_.binarizer;
    Tensor z1 = vtanh(matmul(binarize(pool, kind), binarize(p.w1.value, kind)));
    Tensor z2 = matmul(binarize(z1, kind), binarize(p.w2.value, kind));
    return add(z2, p.bias.value);
}

InferResult Model::infer_with_exit(const TokenSequence& seq, double delta,
                                   bool use_early_exit) const {
    EmbeddedSequence x = embed_input(seq);
    InferResult res;
    Tensor h = x.values;
    res.trace.exit_index = run_exit_loop(
        cfg_.blocks, cfg_.classes, delta, use_early_exit, h,
        [&](std::size_t c, Tensor& state) {
            state = block_forward(c, state, x.pad_mask, false, nullptr);
        },
        [&](std::size_t c, Tensor& state) { return head_forward(c, state, x.pad_mask).data(); },
        res.trace.entropies, res.trace.logits);
    res.trace.flops = count_flops(cfg_, res.trace.exit_index).adjusted();
    res.probabilities = softmax_vec(res.trace.logits);
    res.prediction = static_cast<int>(
        std::max_element(res.probabilities.begin(), res.probabilities.end()) -
        res.probabilities.begin());
    return res;
}

}  // namespace beex
