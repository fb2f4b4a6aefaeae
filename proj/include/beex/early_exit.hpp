#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace beex {

// Shannon entropy of softmax(logits) via the max-shifted log-sum-exp form.
double entropy(std::span<const double> logits);

// Direct -sum p ln p evaluation; the independent oracle for `entropy`.
double entropy_direct(std::span<const double> logits);

std::vector<double> softmax_vec(std::span<const double> logits);

// Exit when the fractional entropy reduction falls below delta; a
// non-positive previous entropy means the prediction is already certain.
bool exit_decision(double s_prev, double s_curr, double delta);

// Shared Algorithm-2 driver: callers supply the per-block transition and
// the per-block head so both the tape path and the frozen path run the
// identical exit rule.
template <typename BlockFn, typename HeadFn, typename State>
std::size_t run_exit_loop(std::size_t num_blocks, std::size_t classes, double delta,
                          bool use_early_exit, State& h, BlockFn&& block, HeadFn&& head,
                          std::vector<double>& entropies, std::vector<double>& exit_logits) {
    double s_prev = std::log(static_cast<double>(classes));
    for (std::size_t c = 0; c < num_blocks; ++c) {
        block(c, h);
        std::vector<double> z = head(c, h);
        const double s_curr = entropy(z);
        entropies.push_back(s_curr);
        if (use_early_exit && exit_decision(s_prev, s_curr, delta)) {
            exit_logits = std::move(z);
            return c + 1;
        }
        if (c + 1 == num_blocks) {
            exit_logits = std::move(z);  // forced final exit
            return num_blocks;
        }
        s_prev = s_curr;
    }
    return num_blocks;
}

}  // namespace beex
