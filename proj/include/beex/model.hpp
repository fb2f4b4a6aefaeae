#pragma once

#include <optional>
#include <random>
#include <vector>

#include "beex/binarize.hpp"
#include "beex/embedding.hpp"
#include "beex/tensor.hpp"
#include "beex/vocab.hpp"

namespace beex {

enum class SlfnRule { Literal, Corrected };

SlfnRule slfn_rule_from_string(const std::string& s);
std::string to_string(SlfnRule r);

struct ModelConfig {
    std::size_t vocab_size = 0;   // |V| real tokens
    std::size_t classes = 2;      // m
    std::size_t blocks = 6;       // C
    std::size_t heads = 4;        // H
    std::size_t width = 512;      // D = 2*D'
    std::size_t hidden = 768;     // D_h, SLFN state width
    std::size_t max_len = 32;     // l
    double dropout = 0.3;
    Binarizer binarizer = Binarizer::SecondOrder;
    SlfnRule slfn_rule = SlfnRule::Literal;
    bool share_forget_weights = false;  // Sh reuses U_sg as printed
    bool use_slfn = true;               // false = WSLFN ablation
    uint64_t seed = 1;

    std::size_t embed_dim() const { return width / 2; }   // D'
    std::size_t head_dim() const { return width / heads; }
    std::size_t exit_hidden() const { return std::max<std::size_t>(width / 4, 2); }
    void validate() const;
};

struct BlockParams {
    std::vector<Parameter> wq, wk, wv;  // per head, D x D/H
    Parameter wo;                       // D x D
    Parameter w_sg, w_tg;               // D x D_h
    Parameter u_sh, u_sg, u_tg;         // D_h x D_h
    Parameter proj;                     // D_h x D
    Parameter norm1_g, norm1_b, norm2_g, norm2_b;  // D, full precision
};

struct ExitHeadParams {
    Parameter w1;    // D x D/4
    Parameter w2;    // D/4 x m
    Parameter bias;  // 1 x m, full precision
};

struct ExitTrace {
    std::vector<double> entropies;  // one per executed block
    std::size_t exit_index = 0;     // 1-based; == blocks when no exit fired earlier
    std::vector<double> logits;
    double flops = 0.0;
};

struct InferResult {
    int prediction = -1;
    std::vector<double> probabilities;
    ExitTrace trace;
};

// Training-mode BEExformer: latent weights viewed through b(), all blocks
// and heads on the tape.
class Model {
public:
    Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    EmbeddedSequence embed_input(const TokenSequence& seq) const;
    Tensor block_forward(std::size_t c, const Tensor& h,
                         const std::vector<std::uint8_t>& pad_mask, bool training,
                         std::mt19937_64* rng) const;
    // All C hidden states; training needs every exit.
    std::vector<Tensor> backbone_forward(const EmbeddedSequence& x, bool training,
                                         std::mt19937_64* rng) const;
    Tensor head_forward(std::size_t c, const Tensor& h_c,
                        const std::vector<std::uint8_t>& pad_mask) const;

    // Algorithm-2 inference with the entropy-ratio exit rule; dropout off.
    InferResult infer_with_exit(const TokenSequence& seq, double delta,
                                bool use_early_exit = true) const;

    Parameter embedding;  // (|V|+2) x D', full precision; row 0 stays zero
    std::vector<BlockParams> blocks;
    std::vector<ExitHeadParams> heads;

private:
    ModelConfig cfg_;
    Tensor posenc_;
};

Tensor self_attention_head(const Tensor& x_bin, const Parameter& wq, const Parameter& wk,
                           const Parameter& wv, const std::vector<std::uint8_t>& pad_mask,
                           std::size_t model_width, Binarizer kind, double dropout_p,
                           std::mt19937_64* rng, bool training);

Tensor multi_head_attention(const Tensor& x, const BlockParams& p,
                            const std::vector<std::uint8_t>& pad_mask, const ModelConfig& cfg,
                            bool training, std::mt19937_64* rng);

// One SLFN recurrence step given pre-binarized weights.
Tensor slfn_step(const Tensor& x_i, const Tensor& h_prev, const Tensor& w_sg_b,
                 const Tensor& u_sg_b, const Tensor& w_tg_b, const Tensor& u_tg_b,
                 const Tensor& u_sh_b, SlfnRule rule, Binarizer kind);

}  // namespace beex
