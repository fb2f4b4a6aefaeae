#include "beex/early_exit.hpp"

#include <algorithm>
#include <cmath>

namespace beex {

double entropy(std::span<const double> logits) {
    double mx = -HUGE_VAL;
    for (double z : logits) mx = std::max(mx, z);
    double sum_exp = 0.0, sum_z_exp = 0.0;
    for (double z : logits) {
        const double e = std::exp(z - mx);
        sum_exp += e;
        sum_z_exp += (z - mx) * e;
    }
    // ln(sum exp z) - (sum z exp z)/(sum exp z), shift-invariant
    return std::log(sum_exp) - sum_z_exp / sum_exp;
}

double entropy_direct(std::span<const double> logits) {
    const std::vector<double> p = softmax_vec(logits);
    double h = 0.0;
    for (double pi : p)
        if (pi > 0.0) h -= pi * std::log(pi);
    return h;
}

std::vector<double> softmax_vec(std::span<const double> logits) {
    double mx = -HUGE_VAL;
    for (double z : logits) mx = std::max(mx, z);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& pi : p) pi /= z;
    return p;
}

bool exit_decision(double s_prev, double s_curr, double delta) {
    if (s_prev <= 1e-12) return true;  // entropy already minimal
    return (s_prev - s_curr) / s_prev < delta;
}

}  // namespace beex
