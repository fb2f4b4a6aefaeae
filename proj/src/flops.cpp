#include "beex/flops.hpp"

namespace beex {

namespace {
constexpr double kMulAdd = 2.0;
constexpr double kAct = 5.0;
constexpr double kBin = 2.0;
constexpr double kNorm = 8.0;
}  // namespace

FlopsLedger& FlopsLedger::operator+=(const FlopsLedger& o) {
    embedding += o.embedding;
    mha += o.mha;
    slfn += o.slfn;
    norms += o.norms;
    heads += o.heads;
    binary += o.binary;
    return *this;
}

FlopsLedger& FlopsLedger::operator*=(double s) {
    embedding *= s;
    mha *= s;
    slfn *= s;
    norms *= s;
    heads *= s;
    binary *= s;
    return *this;
}

FlopsLedger embedding_flops(const ModelConfig& cfg) {
    FlopsLedger f;
    const double L = static_cast<double>(cfg.max_len);
    const double D = static_cast<double>(cfg.width);
    f.embedding = L * D;  // lookup + positional concat, one move/add per element
    return f;
}

FlopsLedger block_flops(const ModelConfig& cfg) {
    FlopsLedger f;
    const double L = static_cast<double>(cfg.max_len);
    const double D = static_cast<double>(cfg.width);
    const double H = static_cast<double>(cfg.heads);
    const double dh = static_cast<double>(cfg.head_dim());
    const double Dh = static_cast<double>(cfg.hidden);

    // MHA
    double mha = kBin * L * D;                   // binarize x
    mha += H * 3.0 * kBin * D * dh;              // binarize W_q/k/v
    const double qkv = H * 3.0 * kMulAdd * L * D * dh;  // b(x) * b(W)
    mha += qkv;
    mha += H * (kMulAdd * L * L * dh             // Q K^T
                + L * L                          // scale
                + kAct * L * L                   // softmax
                + kMulAdd * L * L * dh);         // probs * V
    mha += kBin * L * D + kBin * D * D;          // binarize concat and W_o
    const double oproj = kMulAdd * L * D * D;
    mha += oproj;
    f.mha = mha;
    f.binary += qkv + oproj;

    // SLFN
    if (cfg.use_slfn) {
        const double u_mats = cfg.slfn_rule == SlfnRule::Corrected ? 3.0 : 2.0;
        double slfn = kBin * (2.0 * D * Dh + u_mats * Dh * Dh + Dh * D);  // binarize weights once
        double gate_mm = 0.0;
        double per_pos = kBin * D + kBin * Dh;         // binarize x_i, h_prev
        const double x_mm = 2.0 * kMulAdd * D * Dh;    // W_sg, W_tg
        const double h_mm = u_mats * kMulAdd * Dh * Dh;
        per_pos += x_mm + h_mm;
        gate_mm += x_mm + h_mm;
        per_pos += 2.0 * Dh;                           // gate pre-activation adds
        per_pos += kAct * Dh * u_mats;                 // sigma / tanh per gate
        per_pos += kBin * Dh * 3.0 + 2.0 * Dh;         // binarize gates, update rule
        const double proj_mm = kMulAdd * Dh * D;
        per_pos += kBin * Dh + proj_mm;                // binarize h, project
        gate_mm += proj_mm;
        slfn += L * per_pos;
        f.slfn = slfn;
        f.binary += L * gate_mm;
    }

    // residuals + two layer norms
    f.norms = (cfg.use_slfn ? 2.0 : 1.0) * (L * D + kNorm * L * D);
    return f;
}

FlopsLedger head_flops(const ModelConfig& cfg) {
    FlopsLedger f;
    const double L = static_cast<double>(cfg.max_len);
    const double D = static_cast<double>(cfg.width);
    const double q = static_cast<double>(cfg.exit_hidden());
    const double m = static_cast<double>(cfg.classes);
    double h = L * D;                       // pooling
    h += kBin * D + kBin * D * q;           // binarize pool and w1
    const double mm1 = kMulAdd * D * q;
    h += mm1 + kAct * q;
    h += kBin * q + kBin * q * m;
    const double mm2 = kMulAdd * q * m;
    h += mm2 + m;                           // bias add
    f.heads = h;
    f.binary = mm1 + mm2;
    return f;
}

FlopsLedger count_flops(const ModelConfig& cfg, std::size_t exit_index) {
    FlopsLedger f = embedding_flops(cfg);
    FlopsLedger b = block_flops(cfg);
    FlopsLedger h = head_flops(cfg);
    for (std::size_t c = 0; c < exit_index; ++c) {
        f += b;
        f += h;
    }
    return f;
}

FlopsLedger count_flops_full(const ModelConfig& cfg) {
    FlopsLedger f = embedding_flops(cfg);
    FlopsLedger b = block_flops(cfg);
    for (std::size_t c = 0; c < cfg.blocks; ++c) f += b;
    f += head_flops(cfg);
    return f;
}

std::uint64_t params_per_block(const ModelConfig& cfg) {
    const std::uint64_t D = cfg.width, H = cfg.heads, dh = cfg.head_dim(), Dh = cfg.hidden;
    std::uint64_t n = H * 3 * D * dh + D * D;  // attention
    if (cfg.use_slfn) {
        n += 2 * D * Dh;                      // W_sg, W_tg
        // U_sh is a distinct matrix only under the corrected, non-shared rule
        const bool own_u_sh =
            cfg.slfn_rule == SlfnRule::Corrected && !cfg.share_forget_weights;
        n += (own_u_sh ? 3 : 2) * Dh * Dh;
        n += Dh * D;                          // projection
        n += 4 * D;                           // two norms
    } else {
        n += 2 * D;
    }
    return n;
}

std::uint64_t params_per_head(const ModelConfig& cfg) {
    const std::uint64_t D = cfg.width, q = cfg.exit_hidden(), m = cfg.classes;
    return D * q + q * m + m;
}

std::uint64_t params_total(const ModelConfig& cfg) {
    return (cfg.vocab_size + 2) * cfg.embed_dim() + cfg.blocks * params_per_block(cfg) +
           cfg.blocks * params_per_head(cfg);
}

std::uint64_t parameters_saved(const ModelConfig& cfg, std::size_t exit_index) {
    if (exit_index >= cfg.blocks) return 0;
    return (cfg.blocks - exit_index) * params_per_block(cfg);
}

}  // namespace beex
