#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "beex/errors.hpp"

namespace beex {

struct TensorImpl;
using GradMap = std::unordered_map<TensorImpl*, std::vector<double>>;

// One tape node: forward value plus the rule that routes an upstream
// cotangent to its parents. Leaves have no backprop rule and keep a
// persistent grad buffer that backward() accumulates into.
struct TensorImpl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // persistent, leaves only
    bool requires_grad = false;
    std::string op;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(const std::vector<double>&, GradMap&)> backprop;

    std::size_t size() const { return data.size(); }
    bool is_leaf() const { return parents.empty(); }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi,
                          std::mt19937_64& rng, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rows() const { return impl_->shape.at(0); }
    std::size_t cols() const { return impl_->shape.at(1); }

    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& mutable_data() { return impl_->data; }
    double item() const;
    double at(std::size_t i) const { return impl_->data.at(i); }
    double at(std::size_t i, std::size_t j) const { return impl_->data.at(i * cols() + j); }

    bool requires_grad() const { return impl_->requires_grad; }
    const std::vector<double>& grad() const;
    void zero_grad();

    TensorImpl* node() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& ptr() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// --- autograd ---------------------------------------------------------------

// Accumulates d(root)/d(leaf) into every requires_grad leaf reachable from
// root. Cotangents for interior nodes live in a per-call map, so repeated
// calls add exactly one more copy of the gradient.
void backward(const Tensor& root);

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // a: L x D, v: 1 x D
Tensor vtanh(const Tensor& a);
Tensor vsigmoid(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Row-wise softmax with max-shift; masked columns (mask true) get weight 0.
Tensor softmax_rows(const Tensor& a, const std::vector<std::uint8_t>* col_mask = nullptr);

// Generic elementwise op with caller-supplied value/derivative rules.
Tensor apply_unary(const Tensor& a, const std::function<double(double)>& f,
                   const std::function<double(double)>& df, const std::string& name);

Tensor row(const Tensor& a, std::size_t i);                 // 1 x D view copy
Tensor stack_rows(const std::vector<Tensor>& rows);         // n x D
Tensor concat_cols(const std::vector<Tensor>& parts);       // L x sum(D_i)
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
Tensor mean_rows_masked(const Tensor& a, const std::vector<std::uint8_t>& keep);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool training);
Tensor cross_entropy(const Tensor& logits, int label);  // logits: 1 x m

// --- bit-packed +/-1 matrices -----------------------------------------------

// Row-major, 1 bit per entry, bit=1 encodes +1. Bits are little-endian
// within 64-bit words; each row starts on a word boundary and pad bits
// stay zero (excluded from popcounts by a per-row mask).
struct PackedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t words_per_row = 0;
    std::vector<std::uint64_t> words;

    static PackedMatrix pack(const Tensor& m);
    static PackedMatrix pack(std::size_t rows, std::size_t cols, std::span<const double> data);
    Tensor unpack() const;
    double get(std::size_t i, std::size_t j) const;
};

// entry (i,j) = 2 * popcount(XNOR(row_i(a), col_j(b))) - k; bit-exact match
// with float matmul of the unpacked operands.
Tensor packed_matmul(const PackedMatrix& a, const PackedMatrix& b);

}  // namespace beex
