#pragma once

#include <span>

#include "beex/data.hpp"
#include "beex/model.hpp"

namespace beex {

struct TrainConfig {
    double lr0 = 0.01;
    double lr_min = 0.0001;
    double plateau_decay = 0.5;
    std::size_t plateau_patience = 2;
    std::size_t stop_patience = 5;
    std::size_t batch = 32;
    std::size_t epochs = 50;
    double delta = 0.0001;  // EE threshold used for dev evaluation
    Metric metric = Metric::Accuracy;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochReport {
    std::size_t epoch = 0;
    double loss = 0.0;                 // mean soft-routing loss over batches
    std::vector<double> exit_losses;   // per-exit means over the epoch
    double dev_metric = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochReport> reports;
    double best_metric = 0.0;
    std::size_t best_epoch = 0;
};

// Mean cross-entropy per exit over a batch; the full-depth forward runs
// once per sample and every head reads its block's hidden state.
std::vector<Tensor> per_exit_losses(const Model& model, std::span<const Sample> batch,
                                    std::mt19937_64* rng, bool training);

// Mean of the per-exit losses.
Tensor soft_routing_loss(const std::vector<Tensor>& exit_losses);

double evaluate(const Model& model, const Dataset& data, double delta, Metric metric,
                bool use_early_exit = true);

// Adam over all parameters with the latent clamp, plateau LR decay, early
// stopping, and best-dev snapshot restore.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg);

}  // namespace beex
