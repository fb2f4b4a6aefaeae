#pragma once

#include <cstdint>

#include "beex/model.hpp"

namespace beex {

// Counting convention (stated in every report): one multiply-add = 2
// FLOPs; softmax/sigmoid/tanh = 5 FLOPs per element; binarization = 2
// FLOPs per element; layer norm = 8 FLOPs per element. `binary` is the
// subset of matmul FLOPs whose operands are both +/-1; the adjusted total
// weights those 1/64 to reflect XNOR-popcount execution.
struct FlopsLedger {
    double embedding = 0;
    double mha = 0;
    double slfn = 0;
    double norms = 0;
    double heads = 0;
    double binary = 0;  // included in the component totals above

    double nominal() const { return embedding + mha + slfn + norms + heads; }
    double adjusted() const { return nominal() - binary + binary / 64.0; }

    FlopsLedger& operator+=(const FlopsLedger& o);
    FlopsLedger& operator*=(double s);
};

// Cost of one transformer block / one exit head at sequence length cfg.max_len.
FlopsLedger block_flops(const ModelConfig& cfg);
FlopsLedger head_flops(const ModelConfig& cfg);
FlopsLedger embedding_flops(const ModelConfig& cfg);

// Early-exit run: `exit_index` blocks executed, one head after each.
FlopsLedger count_flops(const ModelConfig& cfg, std::size_t exit_index);
// Without early exit: all blocks, final head only.
FlopsLedger count_flops_full(const ModelConfig& cfg);

// Trainable scalars in one block / one head / the whole model.
std::uint64_t params_per_block(const ModelConfig& cfg);
std::uint64_t params_per_head(const ModelConfig& cfg);
std::uint64_t params_total(const ModelConfig& cfg);

// Parameters skipped by exiting at `exit_index` of cfg.blocks.
std::uint64_t parameters_saved(const ModelConfig& cfg, std::size_t exit_index);

}  // namespace beex
