#include "beex/train.hpp"

#include <algorithm>
#include <numeric>

namespace beex {

void TrainConfig::validate() const {
    if (lr0 <= 0.0 || lr_min <= 0.0 || lr_min > lr0)
        throw config_error("learning rates must satisfy 0 < lr_min <= lr0");
    if (plateau_decay <= 0.0 || plateau_decay >= 1.0)
        throw config_error("plateau_decay must be in (0,1)");
    if (batch == 0 || epochs == 0) throw config_error("batch and epochs must be positive");
    if (delta < 0.0) throw config_error("delta must be non-negative");
}

std::vector<Tensor> per_exit_losses(const Model& model, std::span<const Sample> batch,
                                    std::mt19937_64* rng, bool training) {
    if (batch.empty()) throw contract_error("per_exit_losses: empty batch");
    const std::size_t C = model.config().blocks;
    std::vector<std::vector<Tensor>> ce(C);  // [exit][sample]
    for (const Sample& s : batch) {
        EmbeddedSequence x = model.embed_input(s.seq);
        const auto hiddens = model.backbone_forward(x, training, rng);
        for (std::size_t c = 0; c < C; ++c)
            ce[c].push_back(cross_entropy(model.head_forward(c, hiddens[c], x.pad_mask), s.label));
    }
    std::vector<Tensor> out;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t c = 0; c < C; ++c) {
        Tensor acc = ce[c][0];
        for (std::size_t i = 1; i < ce[c].size(); ++i) acc = add(acc, ce[c][i]);
        out.push_back(scale(acc, inv));
    }
    return out;
}

Tensor soft_routing_loss(const std::vector<Tensor>& exit_losses) {
    if (exit_losses.empty()) throw contract_error("soft_routing_loss: no exits");
    Tensor acc = exit_losses[0];
    for (std::size_t i = 1; i < exit_losses.size(); ++i) acc = add(acc, exit_losses[i]);
    return scale(acc, 1.0 / static_cast<double>(exit_losses.size()));
}

double evaluate(const Model& model, const Dataset& data, double delta, Metric metric,
                bool use_early_exit) {
    std::vector<int> preds, labels;
    for (const Sample& s : data.samples) {
        preds.push_back(model.infer_with_exit(s.seq, delta, use_early_exit).prediction);
        labels.push_back(s.label);
    }
    return compute_metric(metric, preds, labels);
}

namespace {

std::vector<std::vector<double>> snapshot(const std::vector<Parameter*>& params) {
    std::vector<std::vector<double>> snap;
    for (const Parameter* p : params) snap.push_back(p->value.data());
    return snap;
}

void restore(std::vector<Parameter*>& params, const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.mutable_data() = snap[i];
}

}  // namespace

TrainResult train(Model& model, const Dataset& train_set, const Dataset& dev_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.samples.empty() || dev_set.samples.empty())
        throw config_error("train: empty dataset");

    auto params = model.parameters();
    AdamState adam;
    std::mt19937_64 rng(cfg.seed);
    double lr = cfg.lr0;

    TrainResult result;
    double best = -HUGE_VAL;
    std::vector<std::vector<double>> best_snap = snapshot(params);
    std::size_t since_improve = 0, since_plateau = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t C = model.config().blocks;
        std::vector<double> exit_sum(C, 0.0);
        double loss_sum = 0.0;
        std::size_t nbatches = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            std::vector<Sample> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set.samples[order[i]]);

            for (Parameter* p : params) p->value.zero_grad();
            const auto exits = per_exit_losses(model, batch, &rng, true);
            Tensor loss = soft_routing_loss(exits);
            backward(loss);
            bat_step(params, adam, lr);

            loss_sum += loss.item();
            for (std::size_t c = 0; c < C; ++c) exit_sum[c] += exits[c].item();
            ++nbatches;
        }

        EpochReport rep;
        rep.epoch = epoch;
        rep.loss = loss_sum / static_cast<double>(nbatches);
        for (double s : exit_sum) rep.exit_losses.push_back(s / static_cast<double>(nbatches));
        rep.dev_metric = evaluate(model, dev_set, cfg.delta, cfg.metric);
        rep.lr = lr;
        result.reports.push_back(rep);

        if (rep.dev_metric > best) {
            best = rep.dev_metric;
            result.best_metric = best;
            result.best_epoch = epoch;
            best_snap = snapshot(params);
            since_improve = 0;
            since_plateau = 0;
            if (best >= 1.0) break;  // dev metric cannot improve further
        } else {
            ++since_improve;
            ++since_plateau;
            if (since_plateau >= cfg.plateau_patience) {
                lr = std::max(lr * cfg.plateau_decay, cfg.lr_min);
                since_plateau = 0;
            }
            if (since_improve >= cfg.stop_patience) break;
        }
    }

    restore(params, best_snap);
    return result;
}

}  // namespace beex
