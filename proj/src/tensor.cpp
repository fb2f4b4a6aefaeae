#include "beex/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace beex {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

void check_finite(const std::vector<double>& v, const std::string& op) {
    for (double x : v) {
        if (!std::isfinite(x)) throw contract_error("non-finite value produced by " + op);
    }
}

std::shared_ptr<TensorImpl> make_node(std::vector<std::size_t> shape, std::vector<double> data,
                                      std::string op,
                                      std::vector<std::shared_ptr<TensorImpl>> parents,
                                      std::function<void(const std::vector<double>&, GradMap&)> bp) {
    if (shape_numel(shape) != data.size())
        throw contract_error("shape/data mismatch in " + op);
    check_finite(data, op);
    auto n = std::make_shared<TensorImpl>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = std::move(op);
    bool needs = false;
    for (auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backprop = std::move(bp);
    }
    return n;
}

void accum(GradMap& gm, TensorImpl* node, std::size_t n, const double* contrib) {
    auto& g = gm[node];
    if (g.empty()) g.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) g[i] += contrib[i];
}

void require_2d(const Tensor& t, const std::string& op) {
    if (t.shape().size() != 2) throw contract_error(op + ": expected 2-d tensor");
}

}  // namespace

// --- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    auto n = std::make_shared<TensorImpl>();
    n->data.assign(shape_numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw contract_error("Tensor::from: shape/data mismatch");
    check_finite(data, "Tensor::from");
    auto n = std::make_shared<TensorImpl>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi,
                       std::mt19937_64& rng, bool requires_grad) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = dist(rng);
    return from(std::move(shape), std::move(data), requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw contract_error("item(): tensor is not scalar");
    return impl_->data[0];
}

const std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

// --- backward ---------------------------------------------------------------

void backward(const Tensor& root) {
    if (root.size() != 1) throw contract_error("backward: root must be scalar");
    TensorImpl* r = root.node();
    if (!r->requires_grad) return;

    // iterative post-order over the tape
    std::vector<TensorImpl*> order;
    std::unordered_map<TensorImpl*, int> state;  // 0=unseen 1=open 2=done
    std::vector<TensorImpl*> stack{r};
    while (!stack.empty()) {
        TensorImpl* n = stack.back();
        int& s = state[n];
        if (s == 0) {
            s = 1;
            for (auto& p : n->parents)
                if (p->requires_grad && state[p.get()] == 0) stack.push_back(p.get());
        } else {
            stack.pop_back();
            if (s == 1) {
                s = 2;
                order.push_back(n);
            }
        }
    }

    GradMap gm;
    gm[r] = {1.0};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* n = *it;
        auto found = gm.find(n);
        if (found == gm.end()) continue;
        if (n->backprop) n->backprop(found->second, gm);
    }
    for (TensorImpl* n : order) {
        if (n->is_leaf() && n->requires_grad) {
            auto found = gm.find(n);
            if (found == gm.end()) continue;
            if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
            for (std::size_t i = 0; i < n->data.size(); ++i) n->grad[i] += found->second[i];
        }
    }
}

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw contract_error("matmul: inner extents disagree");
    std::vector<double> out(m * n, 0.0);
    const auto& A = a.data();
    const auto& B = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
        }
    auto pa = a.ptr(), pb = b.ptr();
    return Tensor(make_node({m, n}, std::move(out), "matmul", {pa, pb},
                            [pa, pb, m, k, n](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(m * k, 0.0), db(k * n, 0.0);
                                const auto& A = pa->data;
                                const auto& B = pb->data;
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j) {
                                        const double gij = g[i * n + j];
                                        for (std::size_t p = 0; p < k; ++p) {
                                            da[i * k + p] += gij * B[p * n + j];
                                            db[p * n + j] += gij * A[i * k + p];
                                        }
                                    }
                                if (pa->requires_grad) accum(gm, pa.get(), da.size(), da.data());
                                if (pb->requires_grad) accum(gm, pb.get(), db.size(), db.data());
                            }));
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
    auto pa = a.ptr();
    return Tensor(make_node({n, m}, std::move(out), "transpose", {pa},
                            [pa, m, n](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(m * n);
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j)
                                        da[i * n + j] = g[j * m + i];
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw contract_error("add: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto pa = a.ptr(), pb = b.ptr();
    return Tensor(make_node(a.shape(), std::move(out), "add", {pa, pb},
                            [pa, pb](const std::vector<double>& g, GradMap& gm) {
                                if (pa->requires_grad) accum(gm, pa.get(), g.size(), g.data());
                                if (pb->requires_grad) accum(gm, pb.get(), g.size(), g.data());
                            }));
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw contract_error("mul: shape mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto pa = a.ptr(), pb = b.ptr();
    return Tensor(make_node(a.shape(), std::move(out), "mul", {pa, pb},
                            [pa, pb](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> tmp(g.size());
                                if (pa->requires_grad) {
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                        tmp[i] = g[i] * pb->data[i];
                                    accum(gm, pa.get(), tmp.size(), tmp.data());
                                }
                                if (pb->requires_grad) {
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                        tmp[i] = g[i] * pa->data[i];
                                    accum(gm, pb.get(), tmp.size(), tmp.data());
                                }
                            }));
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    auto pa = a.ptr();
    return Tensor(make_node(a.shape(), std::move(out), "scale", {pa},
                            [pa, c](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(g.size());
                                for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * c;
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    require_2d(a, "add_rowvec");
    const std::size_t m = a.rows(), n = a.cols();
    if (v.size() != n) throw contract_error("add_rowvec: width mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + v.data()[j];
    auto pa = a.ptr(), pv = v.ptr();
    return Tensor(make_node(a.shape(), std::move(out), "add_rowvec", {pa, pv},
                            [pa, pv, m, n](const std::vector<double>& g, GradMap& gm) {
                                if (pa->requires_grad) accum(gm, pa.get(), g.size(), g.data());
                                if (pv->requires_grad) {
                                    std::vector<double> dv(n, 0.0);
                                    for (std::size_t i = 0; i < m; ++i)
                                        for (std::size_t j = 0; j < n; ++j) dv[j] += g[i * n + j];
                                    accum(gm, pv.get(), dv.size(), dv.data());
                                }
                            }));
}

Tensor apply_unary(const Tensor& a, const std::function<double(double)>& f,
                   const std::function<double(double)>& df, const std::string& name) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i]);
    auto pa = a.ptr();
    return Tensor(make_node(a.shape(), std::move(out), name, {pa},
                            [pa, df](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(g.size());
                                for (std::size_t i = 0; i < g.size(); ++i)
                                    da[i] = g[i] * df(pa->data[i]);
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor vtanh(const Tensor& a) {
    return apply_unary(a, [](double x) { return std::tanh(x); },
                       [](double x) { double t = std::tanh(x); return 1.0 - t * t; }, "tanh");
}

Tensor vsigmoid(const Tensor& a) {
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    return apply_unary(a, sig, [sig](double x) { double s = sig(x); return s * (1.0 - s); },
                       "sigmoid");
}

Tensor sum(const Tensor& a) {
    double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    auto pa = a.ptr();
    return Tensor(make_node({1}, {s}, "sum", {pa},
                            [pa](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(pa->data.size(), g[0]);
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor softmax_rows(const Tensor& a, const std::vector<std::uint8_t>* col_mask) {
    require_2d(a, "softmax_rows");
    const std::size_t m = a.rows(), n = a.cols();
    if (col_mask && col_mask->size() != n)
        throw contract_error("softmax_rows: mask width mismatch");
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -HUGE_VAL;
        for (std::size_t j = 0; j < n; ++j)
            if (!col_mask || !(*col_mask)[j]) mx = std::max(mx, a.data()[i * n + j]);
        if (mx == -HUGE_VAL) throw contract_error("softmax_rows: all columns masked");
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (col_mask && (*col_mask)[j]) continue;
            out[i * n + j] = std::exp(a.data()[i * n + j] - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    auto pa = a.ptr();
    auto y = std::make_shared<std::vector<double>>(out);
    return Tensor(make_node({m, n}, std::move(out), "softmax_rows", {pa},
                            [pa, y, m, n](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(m * n);
                                for (std::size_t i = 0; i < m; ++i) {
                                    double dot = 0.0;
                                    for (std::size_t j = 0; j < n; ++j)
                                        dot += g[i * n + j] * (*y)[i * n + j];
                                    for (std::size_t j = 0; j < n; ++j)
                                        da[i * n + j] = (*y)[i * n + j] * (g[i * n + j] - dot);
                                }
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor row(const Tensor& a, std::size_t i) {
    require_2d(a, "row");
    const std::size_t n = a.cols();
    if (i >= a.rows()) throw contract_error("row: index out of range");
    std::vector<double> out(a.data().begin() + i * n, a.data().begin() + (i + 1) * n);
    auto pa = a.ptr();
    const std::size_t m = a.rows();
    return Tensor(make_node({1, n}, std::move(out), "row", {pa},
                            [pa, i, m, n](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(m * n, 0.0);
                                std::copy(g.begin(), g.end(), da.begin() + i * n);
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw contract_error("stack_rows: empty input");
    const std::size_t n = rows[0].size();
    std::vector<double> out;
    out.reserve(rows.size() * n);
    std::vector<std::shared_ptr<TensorImpl>> parents;
    for (const auto& r : rows) {
        if (r.size() != n) throw contract_error("stack_rows: ragged rows");
        out.insert(out.end(), r.data().begin(), r.data().end());
        parents.push_back(r.ptr());
    }
    auto ps = parents;
    return Tensor(make_node({rows.size(), n}, std::move(out), "stack_rows", std::move(parents),
                            [ps, n](const std::vector<double>& g, GradMap& gm) {
                                for (std::size_t i = 0; i < ps.size(); ++i)
                                    if (ps[i]->requires_grad)
                                        accum(gm, ps[i].get(), n, g.data() + i * n);
                            }));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: empty input");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        if (p.rows() != m) throw contract_error("concat_cols: row mismatch");
        widths.push_back(p.cols());
        total += p.cols();
        parents.push_back(p.ptr());
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& d = parts[k].data();
        for (std::size_t i = 0; i < m; ++i)
            std::copy(d.begin() + i * widths[k], d.begin() + (i + 1) * widths[k],
                      out.begin() + i * total + off);
        off += widths[k];
    }
    auto ps = parents;
    return Tensor(make_node({m, total}, std::move(out), "concat_cols", std::move(parents),
                            [ps, widths, m, total](const std::vector<double>& g, GradMap& gm) {
                                std::size_t off = 0;
                                for (std::size_t k = 0; k < ps.size(); ++k) {
                                    if (ps[k]->requires_grad) {
                                        std::vector<double> dp(m * widths[k]);
                                        for (std::size_t i = 0; i < m; ++i)
                                            std::copy(g.begin() + i * total + off,
                                                      g.begin() + i * total + off + widths[k],
                                                      dp.begin() + i * widths[k]);
                                        accum(gm, ps[k].get(), dp.size(), dp.data());
                                    }
                                    off += widths[k];
                                }
                            }));
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    require_2d(table, "gather_rows");
    const std::size_t n = table.cols(), rows_in = table.rows();
    std::vector<double> out(ids.size() * n);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= rows_in)
            throw contract_error("gather_rows: id out of range");
        std::copy(table.data().begin() + ids[i] * n, table.data().begin() + (ids[i] + 1) * n,
                  out.begin() + i * n);
    }
    auto pt = table.ptr();
    return Tensor(make_node({ids.size(), n}, std::move(out), "gather_rows", {pt},
                            [pt, ids, n, rows_in](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> dt(rows_in * n, 0.0);
                                for (std::size_t i = 0; i < ids.size(); ++i)
                                    for (std::size_t j = 0; j < n; ++j)
                                        dt[ids[i] * n + j] += g[i * n + j];
                                accum(gm, pt.get(), dt.size(), dt.data());
                            }));
}

Tensor mean_rows_masked(const Tensor& a, const std::vector<std::uint8_t>& keep) {
    require_2d(a, "mean_rows_masked");
    const std::size_t m = a.rows(), n = a.cols();
    if (keep.size() != m) throw contract_error("mean_rows_masked: mask length mismatch");
    std::size_t cnt = 0;
    for (auto k : keep) cnt += k ? 1 : 0;
    if (cnt == 0) throw contract_error("mean_rows_masked: no rows kept");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (keep[i])
            for (std::size_t j = 0; j < n; ++j) out[j] += a.data()[i * n + j];
    for (double& x : out) x /= static_cast<double>(cnt);
    auto pa = a.ptr();
    return Tensor(make_node({1, n}, std::move(out), "mean_rows_masked", {pa},
                            [pa, keep, m, n, cnt](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(m * n, 0.0);
                                for (std::size_t i = 0; i < m; ++i)
                                    if (keep[i])
                                        for (std::size_t j = 0; j < n; ++j)
                                            da[i * n + j] = g[j] / static_cast<double>(cnt);
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    require_2d(a, "layer_norm_rows");
    const std::size_t m = a.rows(), n = a.cols();
    if (gain.size() != n || bias.size() != n)
        throw contract_error("layer_norm_rows: gain/bias width mismatch");
    std::vector<double> out(m * n);
    auto xhat = std::make_shared<std::vector<double>>(m * n);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += a.data()[i * n + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = a.data()[i * n + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            (*xhat)[i * n + j] = (a.data()[i * n + j] - mu) * is;
            out[i * n + j] = gain.data()[j] * (*xhat)[i * n + j] + bias.data()[j];
        }
    }
    auto pa = a.ptr(), pg = gain.ptr(), pb = bias.ptr();
    return Tensor(make_node(
        {m, n}, std::move(out), "layer_norm_rows", {pa, pg, pb},
        [pa, pg, pb, xhat, inv_std, m, n](const std::vector<double>& g, GradMap& gm) {
            if (pa->requires_grad) {
                std::vector<double> da(m * n);
                for (std::size_t i = 0; i < m; ++i) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gy = g[i * n + j] * pg->data[j];
                        s1 += gy;
                        s2 += gy * (*xhat)[i * n + j];
                    }
                    s1 /= static_cast<double>(n);
                    s2 /= static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gy = g[i * n + j] * pg->data[j];
                        da[i * n + j] = (gy - s1 - (*xhat)[i * n + j] * s2) * (*inv_std)[i];
                    }
                }
                accum(gm, pa.get(), da.size(), da.data());
            }
            if (pg->requires_grad) {
                std::vector<double> dg(n, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        dg[j] += g[i * n + j] * (*xhat)[i * n + j];
                accum(gm, pg.get(), dg.size(), dg.data());
            }
            if (pb->requires_grad) {
                std::vector<double> db(n, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) db[j] += g[i * n + j];
                accum(gm, pb.get(), db.size(), db.data());
            }
        }));
}

Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool training) {
    if (!training || p <= 0.0) return a;
    if (p >= 1.0) throw contract_error("dropout: p must be < 1");
    std::bernoulli_distribution keep(1.0 - p);
    auto mask = std::make_shared<std::vector<double>>(a.size());
    const double s = 1.0 / (1.0 - p);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        (*mask)[i] = keep(rng) ? s : 0.0;
        out[i] = a.data()[i] * (*mask)[i];
    }
    auto pa = a.ptr();
    return Tensor(make_node(a.shape(), std::move(out), "dropout", {pa},
                            [pa, mask](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> da(g.size());
                                for (std::size_t i = 0; i < g.size(); ++i)
                                    da[i] = g[i] * (*mask)[i];
                                accum(gm, pa.get(), da.size(), da.data());
                            }));
}

Tensor cross_entropy(const Tensor& logits, int label) {
    const std::size_t m = logits.size();
    if (label < 0 || static_cast<std::size_t>(label) >= m)
        throw data_error("cross_entropy: label out of range");
    double mx = -HUGE_VAL;
    for (double z : logits.data()) mx = std::max(mx, z);
    double lse = 0.0;
    for (double z : logits.data()) lse += std::exp(z - mx);
    lse = std::log(lse) + mx;
    const double loss = lse - logits.data()[label];
    auto pl = logits.ptr();
    return Tensor(make_node({1}, {loss}, "cross_entropy", {pl},
                            [pl, label, mx, lse](const std::vector<double>& g, GradMap& gm) {
                                std::vector<double> dz(pl->data.size());
                                for (std::size_t j = 0; j < dz.size(); ++j) {
                                    const double pj = std::exp(pl->data[j] - lse);
                                    dz[j] = g[0] * (pj - (static_cast<int>(j) == label ? 1.0 : 0.0));
                                }
                                accum(gm, pl.get(), dz.size(), dz.data());
                            }));
}

// --- PackedMatrix -----------------------------------------------------------

PackedMatrix PackedMatrix::pack(const Tensor& m) {
    if (m.shape().size() != 2) throw contract_error("pack: expected 2-d tensor");
    return pack(m.rows(), m.cols(), m.data());
}

PackedMatrix PackedMatrix::pack(std::size_t rows, std::size_t cols, std::span<const double> data) {
    if (data.size() != rows * cols) throw contract_error("pack: shape/data mismatch");
    PackedMatrix p;
    p.rows = rows;
    p.cols = cols;
    p.words_per_row = (cols + 63) / 64;
    p.words.assign(rows * p.words_per_row, 0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = data[i * cols + j];
            if (v != 1.0 && v != -1.0) throw contract_error("pack: entry not in {-1,+1}");
            if (v > 0) p.words[i * p.words_per_row + j / 64] |= (std::uint64_t{1} << (j % 64));
        }
    return p;
}

Tensor PackedMatrix::unpack() const {
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = get(i, j);
    return Tensor::from({rows, cols}, std::move(out));
}

double PackedMatrix::get(std::size_t i, std::size_t j) const {
    const bool bit = (words[i * words_per_row + j / 64] >> (j % 64)) & 1;
    return bit ? 1.0 : -1.0;
}

Tensor packed_matmul(const PackedMatrix& a, const PackedMatrix& b) {
    if (a.cols != b.rows) throw contract_error("packed_matmul: inner extents disagree");
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
    const std::size_t wpr = a.words_per_row;

    // column-major repack of b so each output entry is one row-vs-row scan
    PackedMatrix bt;
    bt.rows = n;
    bt.cols = k;
    bt.words_per_row = (k + 63) / 64;
    bt.words.assign(n * bt.words_per_row, 0);
    for (std::size_t i = 0; i < b.rows; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if ((b.words[i * b.words_per_row + j / 64] >> (j % 64)) & 1)
                bt.words[j * bt.words_per_row + i / 64] |= (std::uint64_t{1} << (i % 64));

    // pad bits of XNOR are masked out so they never enter the popcount
    std::vector<std::uint64_t> mask(wpr, ~std::uint64_t{0});
    if (k % 64 != 0) mask[wpr - 1] = (std::uint64_t{1} << (k % 64)) - 1;

    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            int agree = 0;
            for (std::size_t w = 0; w < wpr; ++w)
                agree += std::popcount(~(a.words[i * wpr + w] ^ bt.words[j * wpr + w]) & mask[w]);
            out[i * n + j] = static_cast<double>(2 * agree - static_cast<int>(k));
        }
    return Tensor::from({m, n}, std::move(out));
}

}  // namespace beex
