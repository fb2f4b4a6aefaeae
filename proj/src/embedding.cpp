#include "beex/embedding.hpp"

#include <cmath>

namespace beex {

Tensor position_encoding(std::size_t len, std::size_t dim) {
    if (dim < 2) throw contract_error("position_encoding: dim must be >= 2");
    std::vector<double> out(len * dim);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t d = 0; d < dim; ++d) {
            const double expo = static_cast<double>(d % 2 == 0 ? d : d - 1) /
                                static_cast<double>(dim);
            const double angle = static_cast<double>(i) / std::pow(10000.0, expo);
            out[i * dim + d] = (d % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return Tensor::from({len, dim}, std::move(out));
}

EmbeddedSequence embed(const TokenSequence& seq, const Tensor& table, const Tensor& posenc) {
    const std::size_t len = seq.ids.size();
    if (posenc.rows() < len) throw contract_error("embed: position encoding too short");
    if (posenc.cols() != table.cols())
        throw contract_error("embed: table/posenc width mismatch");

    Tensor tok = gather_rows(table, seq.ids);
    Tensor pos = posenc.rows() == len
                     ? posenc
                     : [&] {
                           std::vector<double> p(len * posenc.cols());
                           std::copy(posenc.data().begin(),
                                     posenc.data().begin() + len * posenc.cols(), p.begin());
                           return Tensor::from({len, posenc.cols()}, std::move(p));
                       }();

    EmbeddedSequence out;
    out.values = concat_cols({tok, pos});
    out.pad_mask.resize(len);
    for (std::size_t i = 0; i < len; ++i) out.pad_mask[i] = seq.ids[i] == kPadId ? 1 : 0;
    return out;
}

}  // namespace beex
