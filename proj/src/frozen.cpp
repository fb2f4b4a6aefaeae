#include "beex/frozen.hpp"

#include <algorithm>
#include <cmath>

#include "beex/early_exit.hpp"
#include "beex/flops.hpp"

namespace beex {

namespace {

// sign-binarized activation times a frozen +/-1 weight matrix
Tensor bin_mm(const Tensor& act, const PackedMatrix& w, bool use_packed) {
    Tensor s = sign_of(act);
    if (use_packed) return packed_matmul(PackedMatrix::pack(s), w);
    return matmul(s, w.unpack());
}

}  // namespace

FrozenModel::FrozenModel(const ModelConfig& cfg) : cfg_(cfg) {
    posenc_ = position_encoding(cfg_.max_len, cfg_.embed_dim());
}

FrozenModel FrozenModel::from(const Model& model) {
    FrozenModel f(model.config());
    f.embedding = Tensor::from(model.embedding.value.shape(), model.embedding.value.data());
    for (const auto& b : model.blocks) {
        FrozenBlock fb;
        for (const auto& p : b.wq) fb.wq.push_back(freeze(p).packed);
        for (const auto& p : b.wk) fb.wk.push_back(freeze(p).packed);
        for (const auto& p : b.wv) fb.wv.push_back(freeze(p).packed);
        fb.wo = freeze(b.wo).packed;
        if (model.config().use_slfn) {
            fb.w_sg = freeze(b.w_sg).packed;
            fb.w_tg = freeze(b.w_tg).packed;
            fb.u_sg = freeze(b.u_sg).packed;
            fb.u_tg = freeze(b.u_tg).packed;
            if (model.config().slfn_rule == SlfnRule::Corrected)
                fb.u_sh = freeze(b.u_sh).packed;
            fb.proj = freeze(b.proj).packed;
        }
        fb.norm1_g = Tensor::from(b.norm1_g.value.shape(), b.norm1_g.value.data());
        fb.norm1_b = Tensor::from(b.norm1_b.value.shape(), b.norm1_b.value.data());
        fb.norm2_g = Tensor::from(b.norm2_g.value.shape(), b.norm2_g.value.data());
        fb.norm2_b = Tensor::from(b.norm2_b.value.shape(), b.norm2_b.value.data());
        f.blocks.push_back(std::move(fb));
    }
    for (const auto& h : model.heads) {
        FrozenHead fh;
        fh.w1 = freeze(h.w1).packed;
        fh.w2 = freeze(h.w2).packed;
        fh.bias = Tensor::from(h.bias.value.shape(), h.bias.value.data());
        f.heads.push_back(std::move(fh));
    }
    return f;
}

InferResult FrozenModel::infer(const TokenSequence& seq, double delta, bool use_early_exit,
                               bool use_packed) const {
    EmbeddedSequence x = embed(seq, embedding, posenc_);
    const std::vector<std::uint8_t>& pad = x.pad_mask;
    std::vector<std::uint8_t> keep(pad.size());
    for (std::size_t i = 0; i < pad.size(); ++i) keep[i] = pad[i] ? 0 : 1;

    auto block_fn = [&](std::size_t c, Tensor& h) {
        const FrozenBlock& b = blocks[c];
        std::vector<Tensor> head_outs;
        for (std::size_t i = 0; i < cfg_.heads; ++i) {
            Tensor q = bin_mm(h, b.wq[i], use_packed);
            Tensor k = bin_mm(h, b.wk[i], use_packed);
            Tensor v = bin_mm(h, b.wv[i], use_packed);
            Tensor scores =
                scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg_.width)));
            head_outs.push_back(matmul(softmax_rows(scores, &pad), v));
        }
        Tensor att = bin_mm(concat_cols(head_outs), b.wo, use_packed);
        Tensor u = layer_norm_rows(add(h, att), b.norm1_g, b.norm1_b);
        if (!cfg_.use_slfn) {
            h = u;
            return;
        }
        Tensor state = Tensor::zeros({1, cfg_.hidden});
        std::vector<Tensor> rows_out;
        for (std::size_t i = 0; i < u.rows(); ++i) {
            Tensor xi = row(u, i);
            Tensor sg = vsigmoid(add(bin_mm(xi, b.w_sg, use_packed),
                                     bin_mm(state, b.u_sg, use_packed)));
            Tensor tg = vtanh(add(bin_mm(xi, b.w_tg, use_packed),
                                  bin_mm(state, b.u_tg, use_packed)));
            Tensor learn = mul(sign_of(sg), sign_of(tg));
            if (cfg_.slfn_rule == SlfnRule::Corrected) {
                Tensor sh = vsigmoid(bin_mm(state, b.u_sh, use_packed));
                state = add(mul(sign_of(sh), sign_of(state)), learn);
            } else {
                state = add(sign_of(sg), learn);
            }
            rows_out.push_back(bin_mm(state, b.proj, use_packed));
        }
        h = layer_norm_rows(add(u, stack_rows(rows_out)), b.norm2_g, b.norm2_b);
    };

    auto head_fn = [&](std::size_t c, Tensor& h) {
        const FrozenHead& hd = heads[c];
        Tensor pool = mean_rows_masked(h, keep);
        Tensor z1 = vtanh(bin_mm(pool, hd.w1, use_packed));
        Tensor z2 = bin_mm(z1, hd.w2, use_packed);
        return add(z2, hd.bias).data();
    };

    InferResult res;
    Tensor h = x.values;
    res.trace.exit_index = run_exit_loop(cfg_.blocks, cfg_.classes, delta, use_early_exit, h,
                                         block_fn, head_fn, res.trace.entropies,
                                         res.trace.logits);
    res.trace.flops = count_flops(cfg_, res.trace.exit_index).adjusted();
    res.probabilities = softmax_vec(res.trace.logits);
    res.prediction = static_cast<int>(
        std::max_element(res.probabilities.begin(), res.probabilities.end()) -
        res.probabilities.begin());
    return res;
}

void FrozenModel::for_each_packed(
    const std::function<void(const std::string&, const PackedMatrix&)>& fn) const {
    for (std::size_t c = 0; c < blocks.size(); ++c) {
        const std::string b = "block" + std::to_string(c) + ".";
        for (std::size_t i = 0; i < blocks[c].wq.size(); ++i) {
            fn(b + "wq" + std::to_string(i), blocks[c].wq[i]);
            fn(b + "wk" + std::to_string(i), blocks[c].wk[i]);
            fn(b + "wv" + std::to_string(i), blocks[c].wv[i]);
        }
        fn(b + "wo", blocks[c].wo);
        if (cfg_.use_slfn) {
            fn(b + "w_sg", blocks[c].w_sg);
            fn(b + "w_tg", blocks[c].w_tg);
            if (cfg_.slfn_rule == SlfnRule::Corrected && !cfg_.share_forget_weights)
                fn(b + "u_sh", blocks[c].u_sh);
            fn(b + "u_sg", blocks[c].u_sg);
            fn(b + "u_tg", blocks[c].u_tg);
            fn(b + "proj", blocks[c].proj);
        }
    }
    for (std::size_t c = 0; c < heads.size(); ++c) {
        const std::string e = "head" + std::to_string(c) + ".";
        fn(e + "w1", heads[c].w1);
        fn(e + "w2", heads[c].w2);
    }
}

void FrozenModel::for_each_fp(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    fn("embedding", embedding);
    for (std::size_t c = 0; c < blocks.size(); ++c) {
        const std::string b = "block" + std::to_string(c) + ".";
        fn(b + "norm1_g", blocks[c].norm1_g);
        fn(b + "norm1_b", blocks[c].norm1_b);
        if (cfg_.use_slfn) {
            fn(b + "norm2_g", blocks[c].norm2_g);
            fn(b + "norm2_b", blocks[c].norm2_b);
        }
    }
    for (std::size_t c = 0; c < heads.size(); ++c)
        fn("head" + std::to_string(c) + ".bias", heads[c].bias);
}

FrozenModel FrozenModel::assemble(const ModelConfig& cfg,
                                  const std::unordered_map<std::string, PackedMatrix>& packed,
                                  const std::unordered_map<std::string, Tensor>& fp) {
    FrozenModel f(cfg);
    auto get_p = [&](const std::string& name) {
        auto it = packed.find(name);
        if (it == packed.end()) throw data_error("frozen checkpoint missing tensor " + name);
        return it->second;
    };
    auto get_f = [&](const std::string& name) {
        auto it = fp.find(name);
        if (it == fp.end()) throw data_error("frozen checkpoint missing tensor " + name);
        return it->second;
    };
    f.embedding = get_f("embedding");
    for (std::size_t c = 0; c < cfg.blocks; ++c) {
        const std::string b = "block" + std::to_string(c) + ".";
        FrozenBlock fb;
        for (std::size_t i = 0; i < cfg.heads; ++i) {
            fb.wq.push_back(get_p(b + "wq" + std::to_string(i)));
            fb.wk.push_back(get_p(b + "wk" + std::to_string(i)));
            fb.wv.push_back(get_p(b + "wv" + std::to_string(i)));
        }
        fb.wo = get_p(b + "wo");
        if (cfg.use_slfn) {
            fb.w_sg = get_p(b + "w_sg");
            fb.w_tg = get_p(b + "w_tg");
            fb.u_sg = get_p(b + "u_sg");
            fb.u_tg = get_p(b + "u_tg");
            if (cfg.slfn_rule == SlfnRule::Corrected)
                fb.u_sh = cfg.share_forget_weights ? fb.u_sg : get_p(b + "u_sh");
            fb.proj = get_p(b + "proj");
        }
        fb.norm1_g = get_f(b + "norm1_g");
        fb.norm1_b = get_f(b + "norm1_b");
        if (cfg.use_slfn) {
            fb.norm2_g = get_f(b + "norm2_g");
            fb.norm2_b = get_f(b + "norm2_b");
        }
        f.blocks.push_back(std::move(fb));
    }
    for (std::size_t c = 0; c < cfg.blocks; ++c) {
        const std::string e = "head" + std::to_string(c) + ".";
        FrozenHead fh;
        fh.w1 = get_p(e + "w1");
        fh.w2 = get_p(e + "w2");
        fh.bias = get_f(e + "bias");
        f.heads.push_back(std::move(fh));
    }
    return f;
}

}  // namespace beex
