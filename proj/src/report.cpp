#include "beex/report.hpp"

#include <fstream>

#include <json.hpp>

#include "beex/train.hpp"

namespace beex {

using nlohmann::json;

namespace {
const char* kConvention =
    "mul-add=2 flops; softmax/sigmoid/tanh=5 flops/elem; binarize=2 flops/elem; "
    "layernorm=8 flops/elem; +/-1 matmuls weighted 1/64 in adjusted totals";
}

RunReport run_eval(const FrozenModel& model, const Dataset& data, double delta, Metric metric,
                   bool use_early_exit, bool use_packed, const std::string& traces_jsonl_path) {
    const ModelConfig& cfg = model.config();
    RunReport rep;
    rep.dataset = data.name;
    rep.metric_name = to_string(metric);
    rep.delta = delta;
    rep.early_exit = use_early_exit;
    rep.samples = data.size();
    rep.exit_histogram.assign(cfg.blocks, 0);
    rep.flops_wee = count_flops_full(cfg).adjusted();
    rep.flops_convention = kConvention;

    std::ofstream traces;
    if (!traces_jsonl_path.empty()) {
        traces.open(traces_jsonl_path);
        if (!traces) throw data_error("cannot write traces to " + traces_jsonl_path);
    }

    std::vector<int> preds, labels;
    double depth_sum = 0.0, flops_sum = 0.0, saved_sum = 0.0;
    for (const Sample& s : data.samples) {
        InferResult r = model.infer(s.seq, delta, use_early_exit, use_packed);
        preds.push_back(r.prediction);
        labels.push_back(s.label);
        rep.exit_histogram[r.trace.exit_index - 1] += 1;
        depth_sum += static_cast<double>(r.trace.exit_index);
        flops_sum += r.trace.flops;
        saved_sum += static_cast<double>(parameters_saved(cfg, r.trace.exit_index));
        if (traces.is_open()) {
            traces << json{{"entropies", r.trace.entropies},
                           {"exit_index", r.trace.exit_index},
                           {"flops", r.trace.flops},
                           {"prediction", r.prediction},
                           {"label", s.label}}
                          .dump()
                   << '\n';
        }
    }
    rep.metric = compute_metric(metric, preds, labels);
    rep.mean_exit_depth = depth_sum / static_cast<double>(data.size());
    rep.flops_ee = flops_sum / static_cast<double>(data.size());
    rep.parameters_saved = saved_sum;
    rep.reduction_pct = 100.0 * (rep.flops_wee - rep.flops_ee) / rep.flops_wee;
    return rep;
}

std::vector<SweepRow> sweep_delta(const FrozenModel& model, const Dataset& data, Metric metric,
                                  const std::vector<double>& deltas) {
    std::vector<SweepRow> rows;
    for (double d : deltas) {
        const RunReport rep = run_eval(model, data, d, metric);
        rows.push_back({d, rep.metric, rep.mean_exit_depth, rep.flops_ee, rep.reduction_pct});
    }
    return rows;
}

void write_report_json(const RunReport& report, const std::string& path) {
    json j{{"dataset", report.dataset},
           {"metric", report.metric_name},
           {"metric_value", report.metric},
           {"delta", report.delta},
           {"early_exit", report.early_exit},
           {"samples", report.samples},
           {"mean_exit_depth", report.mean_exit_depth},
           {"exit_histogram", report.exit_histogram},
           {"parameters_saved", report.parameters_saved},
           {"flops_ee", report.flops_ee},
           {"flops_wee", report.flops_wee},
           {"reduction_pct", report.reduction_pct},
           {"flops_convention", report.flops_convention}};
    std::ofstream out(path);
    if (!out) throw data_error("cannot write report to " + path);
    out << j.dump(2) << '\n';
}

void write_histogram_csv(const RunReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write histogram to " + path);
    out << "exit_block,count,fraction\n";
    for (std::size_t c = 0; c < report.exit_histogram.size(); ++c)
        out << (c + 1) << ',' << report.exit_histogram[c] << ','
            << static_cast<double>(report.exit_histogram[c]) /
                   static_cast<double>(report.samples)
            << '\n';
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write sweep table to " + path);
    out << "delta,metric,mean_exit_depth,flops_ee,reduction_pct\n";
    for (const auto& r : rows)
        out << r.delta << ',' << r.metric << ',' << r.mean_exit_depth << ',' << r.flops_ee << ','
            << r.reduction_pct << '\n';
}

void append_epoch_jsonl(const EpochReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw data_error("cannot append training log to " + path);
    out << json{{"epoch", report.epoch},
                {"loss", report.loss},
                {"exit_losses", report.exit_losses},
                {"dev_metric", report.dev_metric},
                {"lr", report.lr}}
               .dump()
        << '\n';
}

}  // namespace beex
