#pragma once

#include "beex/tensor.hpp"
#include "beex/vocab.hpp"

namespace beex {

// Sinusoidal encoding: entry (i,d) = sin(i / 10000^(d/D')) for even d,
// cos(i / 10000^((d-1)/D')) for odd d.
Tensor position_encoding(std::size_t len, std::size_t dim);

struct EmbeddedSequence {
    Tensor values;                       // L x D with D = 2*D'
    std::vector<std::uint8_t> pad_mask;  // true at padded positions
};

// Looks up token embeddings and concatenates the positional half; the
// table's row 0 is the all-zero pad row and never receives gradient
// (pad positions are masked out of attention and pooling downstream).
EmbeddedSequence embed(const TokenSequence& seq, const Tensor& table, const Tensor& posenc);

}  // namespace beex
