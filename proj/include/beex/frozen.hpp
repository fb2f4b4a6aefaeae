#pragma once

#include <unordered_map>

#include "beex/model.hpp"

namespace beex {

// Post-training model: every latent weight fixed to sign(W^r) and packed.
// Inference binarizes activations with hard sign as well, so every
// weight-side matmul runs as XNOR-popcount when `use_packed` is on; the
// float path evaluates the identical arithmetic on unpacked operands.
struct FrozenBlock {
    std::vector<PackedMatrix> wq, wk, wv;
    PackedMatrix wo, w_sg, w_tg, u_sh, u_sg, u_tg, proj;
    Tensor norm1_g, norm1_b, norm2_g, norm2_b;
};

struct FrozenHead {
    PackedMatrix w1, w2;
    Tensor bias;
};

class FrozenModel {
public:
    static FrozenModel from(const Model& model);

    const ModelConfig& config() const { return cfg_; }

    InferResult infer(const TokenSequence& seq, double delta, bool use_early_exit = true,
                      bool use_packed = true) const;

    // Visit every tensor in a stable order; used by checkpoint I/O.
    void for_each_packed(const std::function<void(const std::string&, const PackedMatrix&)>& fn) const;
    void for_each_fp(const std::function<void(const std::string&, const Tensor&)>& fn) const;

    // Builder for checkpoint loading: structure from config, payloads by name.
    static FrozenModel assemble(const ModelConfig& cfg,
                                const std::unordered_map<std::string, PackedMatrix>& packed,
                                const std::unordered_map<std::string, Tensor>& fp);

    Tensor embedding;  // full precision
    std::vector<FrozenBlock> blocks;
    std::vector<FrozenHead> heads;

private:
    explicit FrozenModel(const ModelConfig& cfg);
    ModelConfig cfg_;
    Tensor posenc_;
};

}  // namespace beex
