#include "beex/binarize.hpp"

#include <algorithm>
#include <cmath>

namespace beex {

Binarizer binarizer_from_string(const std::string& s) {
    if (s == "b2") return Binarizer::SecondOrder;
    if (s == "clip") return Binarizer::Clip;
    throw config_error("unknown binarizer '" + s + "' (expected b2 or clip)");
}

std::string to_string(Binarizer b) {
    return b == Binarizer::SecondOrder ? "b2" : "clip";
}

double sign_scalar(double r) { return r < 0.0 ? -1.0 : 1.0; }

double binarize_scalar(double r) {
    if (r < -1.0) return -1.0;
    if (r < 0.0) return 2.0 * r + r * r;
    if (r < 1.0) return 2.0 * r - r * r;
    return 1.0;
}

double binarize_grad_scalar(double r) {
    if (r >= -1.0 && r < 1.0) return 2.0 * (1.0 - std::abs(r));
    return 0.0;
}

double clip_scalar(double r) { return std::clamp(r, -1.0, 1.0); }

double clip_grad_scalar(double r) { return (r > -1.0 && r < 1.0) ? 1.0 : 0.0; }

Tensor sign_of(const Tensor& r) {
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sign_scalar(r.data()[i]);
    return Tensor::from(r.shape(), std::move(out));
}

Tensor binarize(const Tensor& r, Binarizer kind) {
    if (kind == Binarizer::Clip)
        return apply_unary(r, clip_scalar, clip_grad_scalar, "clip_binarize");
    return apply_unary(r, binarize_scalar, binarize_grad_scalar, "binarize");
}

Tensor binarize_grad(const Tensor& r) {
    std::vector<double> out(r.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = binarize_grad_scalar(r.data()[i]);
    return Tensor::from(r.shape(), std::move(out));
}

namespace {

const std::vector<double>& checked_grad(const Parameter& p) {
    if (p.value.node()->grad.size() != p.value.size())
        throw contract_error("optimizer step: parameter '" + p.name + "' has no gradient");
    return p.value.node()->grad;
}

}  // namespace

void sgd_step(std::vector<Parameter*>& params, double lr) {
    for (Parameter* p : params) {
        const auto& g = checked_grad(*p);
        auto& w = p->value.mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        if (p->binarized) clamp_latent(*p);
    }
}

void bat_step(std::vector<Parameter*>& params, AdamState& state, double lr) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            state.m[k].assign(params[k]->value.size(), 0.0);
            state.v[k].assign(params[k]->value.size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw contract_error("bat_step: optimizer state does not match parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter* p = params[k];
        const auto& g = checked_grad(*p);
        auto& w = p->value.mutable_data();
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.cfg.beta1 * m[i] + (1.0 - state.cfg.beta1) * g[i];
            v[i] = state.cfg.beta2 * v[i] + (1.0 - state.cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
        if (p->binarized) clamp_latent(*p);
    }
}

void clamp_latent(Parameter& p, double eps) {
    auto& w = p.value.mutable_data();
    for (double& x : w) x = std::clamp(x, -1.0 + eps, 1.0 - eps);
}

FrozenParameter freeze(const Parameter& p) {
    FrozenParameter f;
    f.name = p.name;
    f.packed = PackedMatrix::pack(sign_of(p.value));
    return f;
}

}  // namespace beex
