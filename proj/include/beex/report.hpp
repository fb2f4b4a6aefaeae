#pragma once

#include <string>
#include <vector>

#include "beex/data.hpp"
#include "beex/flops.hpp"
#include "beex/frozen.hpp"

namespace beex {

struct RunReport {
    std::string dataset;
    std::string metric_name;
    double metric = 0.0;
    double delta = 0.0;
    bool early_exit = true;
    std::size_t samples = 0;
    double mean_exit_depth = 0.0;
    std::vector<std::size_t> exit_histogram;  // index c-1 counts exits at block c
    double parameters_saved = 0.0;            // sum over samples of skipped-block params
    double flops_ee = 0.0;                    // mean adjusted FLOPs per sample with EE
    double flops_wee = 0.0;                   // full-depth adjusted FLOPs per sample
    double reduction_pct = 0.0;               // recomputed from the two ledgers
    std::string flops_convention;
};

RunReport run_eval(const FrozenModel& model, const Dataset& data, double delta, Metric metric,
                   bool use_early_exit = true, bool use_packed = true,
                   const std::string& traces_jsonl_path = "");

struct SweepRow {
    double delta = 0.0;
    double metric = 0.0;
    double mean_exit_depth = 0.0;
    double flops_ee = 0.0;
    double reduction_pct = 0.0;
};

std::vector<SweepRow> sweep_delta(const FrozenModel& model, const Dataset& data, Metric metric,
                                  const std::vector<double>& deltas);

void write_report_json(const RunReport& report, const std::string& path);
void write_histogram_csv(const RunReport& report, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
void append_epoch_jsonl(const struct EpochReport& report, const std::string& path);

}  // namespace beex
