#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "beex/binarize.hpp"
#include "beex/early_exit.hpp"
#include "beex/embedding.hpp"
#include "beex/tensor.hpp"

namespace py = pybind11;
using namespace beex;

namespace {

using Matrix = std::vector<std::vector<double>>;

Tensor to_tensor(const Matrix& m) {
    if (m.empty() || m[0].empty()) throw std::invalid_argument("matrix must be non-empty");
    const std::size_t rows = m.size(), cols = m[0].size();
    std::vector<double> flat;
    flat.reserve(rows * cols);
    for (const auto& r : m) {
        if (r.size() != cols) throw std::invalid_argument("ragged matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor::from({rows, cols}, std::move(flat));
}

Matrix to_matrix(const Tensor& t) {
    Matrix out(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) out[i][j] = t.at(i, j);
    return out;
}

std::vector<double> map_vec(const std::vector<double>& v, double (*f)(double)) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "binarization-aware transformer primitives";

    m.def("binarize", [](const std::vector<double>& v) { return map_vec(v, binarize_scalar); },
          "second-order differentiable sign approximation, elementwise");
    m.def("binarize_grad",
          [](const std::vector<double>& v) { return map_vec(v, binarize_grad_scalar); },
          "derivative of binarize, elementwise");
    m.def("sign", [](const std::vector<double>& v) { return map_vec(v, sign_scalar); },
          "hard sign with sign(0) = +1, elementwise");
    m.def("clip", [](const std::vector<double>& v) { return map_vec(v, clip_scalar); },
          "clip(-1, r, 1) straight-through baseline, elementwise");

    m.def("entropy", [](const std::vector<double>& z) { return entropy(z); },
          "Shannon entropy of softmax(logits), log-sum-exp form");
    m.def("softmax", [](const std::vector<double>& z) { return softmax_vec(z); });
    m.def("exit_decision", &exit_decision, py::arg("s_prev"), py::arg("s_curr"),
          py::arg("delta"), "entropy-ratio early-exit rule");

    m.def("position_encoding",
          [](std::size_t len, std::size_t dim) { return to_matrix(position_encoding(len, dim)); },
          py::arg("len"), py::arg("dim"), "sinusoidal positional encoding matrix");

    m.def("packed_matmul",
          [](const Matrix& a, const Matrix& b) {
              Tensor ta = to_tensor(a), tb = to_tensor(b);
              for (double v : ta.data())
                  if (v != 1.0 && v != -1.0) throw std::invalid_argument("entries must be +/-1");
              for (double v : tb.data())
                  if (v != 1.0 && v != -1.0) throw std::invalid_argument("entries must be +/-1");
              return to_matrix(packed_matmul(PackedMatrix::pack(ta), PackedMatrix::pack(tb)));
          },
          "xnor-popcount product of two +/-1 matrices");
}
