#pragma once

#include <string>
#include <vector>

#include "beex/tensor.hpp"

namespace beex {

// Which forward approximation to sign() the binarized layers use. Clip is
// the straight-through ablation baseline.
enum class Binarizer { SecondOrder, Clip };

Binarizer binarizer_from_string(const std::string& s);
std::string to_string(Binarizer b);

// Latents are clamped into [-1+eps, 1-eps] after every optimizer step so
// the hat-shaped derivative never pins a weight at zero gradient.
inline constexpr double kLatentClampEps = 1e-3;

double sign_scalar(double r);          // -1 if r<0, +1 if r>=0
double binarize_scalar(double r);      // piecewise second-order b(r)
double binarize_grad_scalar(double r); // b'(r) = 2(1-|r|) on [-1,1), else 0
double clip_scalar(double r);
double clip_grad_scalar(double r);

// Hard sign, no gradient; used only when freezing weights.
Tensor sign_of(const Tensor& r);

// Differentiable binarization; registers the matching derivative as its
// backward rule so every tape gradient already carries the b' factors.
Tensor binarize(const Tensor& r, Binarizer kind = Binarizer::SecondOrder);

// Elementwise derivative values, exposed for oracle checks.
Tensor binarize_grad(const Tensor& r);

// A trainable tensor. `binarized` marks latent weights that are viewed
// through b() in the forward pass and clamped after each step; the rest
// (norm gains, biases, embeddings) stay full precision.
struct Parameter {
    std::string name;
    Tensor value;
    bool binarized = false;
};

struct FrozenParameter {
    std::string name;
    PackedMatrix packed;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;
};

void sgd_step(std::vector<Parameter*>& params, double lr);

// One Adam step over the latent weights followed by the latent clamp. The
// tape gradient already contains every b' factor, so no extra rescaling
// is applied here.
void bat_step(std::vector<Parameter*>& params, AdamState& state, double lr);

void clamp_latent(Parameter& p, double eps = kLatentClampEps);

FrozenParameter freeze(const Parameter& p);

}  // namespace beex
