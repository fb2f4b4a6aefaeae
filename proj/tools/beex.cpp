#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "beex/checkpoint.hpp"
#include "beex/report.hpp"
#include "beex/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string train_tsv, dev_tsv, test_tsv;
    std::string vocab_path;
    std::string out_dir = "run";
    beex::TsvSchema schema;
    beex::ModelConfig model;
    beex::TrainConfig train;
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw beex::config_error("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw beex::config_error("bad JSON in " + path + ": " + e.what());
    }
}

RunConfig parse_run_config(const std::string& path) {
    const json j = load_json_file(path);
    RunConfig rc;
    const json& d = j.at("data");
    rc.train_tsv = d.at("train").get<std::string>();
    rc.dev_tsv = d.at("dev").get<std::string>();
    rc.test_tsv = d.value("test", rc.dev_tsv);
    rc.schema.text_col = d.value("text_col", "sentence");
    if (d.contains("text2_col") && !d.at("text2_col").is_null())
        rc.schema.text2_col = d.at("text2_col").get<std::string>();
    rc.schema.label_col = d.value("label_col", "label");
    rc.vocab_path = j.value("vocab", "");
    rc.out_dir = j.value("out_dir", "run");

    const json m = j.value("model", json::object());
    rc.model.classes = m.value("classes", 2);
    rc.model.blocks = m.value("blocks", 6);
    rc.model.heads = m.value("heads", 4);
    rc.model.width = m.value("width", 512);
    rc.model.hidden = m.value("hidden", 768);
    rc.model.max_len = m.value("max_len", 32);
    rc.model.dropout = m.value("dropout", 0.3);
    rc.model.binarizer = beex::binarizer_from_string(m.value("binarizer", "b2"));
    rc.model.slfn_rule = beex::slfn_rule_from_string(m.value("slfn_rule", "literal"));
    rc.model.share_forget_weights = m.value("share_forget_weights", false);
    rc.model.use_slfn = m.value("use_slfn", true);
    rc.model.seed = m.value("seed", 1);

    const json t = j.value("train", json::object());
    rc.train.lr0 = t.value("lr0", 0.01);
    rc.train.lr_min = t.value("lr_min", 0.0001);
    rc.train.plateau_decay = t.value("plateau_decay", 0.5);
    rc.train.plateau_patience = t.value("plateau_patience", 2);
    rc.train.stop_patience = t.value("stop_patience", 5);
    rc.train.batch = t.value("batch", 32);
    rc.train.epochs = t.value("epochs", 50);
    rc.train.delta = t.value("delta", 0.0001);
    rc.train.metric = beex::metric_from_string(t.value("metric", "accuracy"));
    rc.train.seed = t.value("seed", rc.model.seed);
    return rc;
}

std::uint64_t resolve_seed(std::uint64_t cfg_seed, std::optional<std::uint64_t> flag_seed) {
    std::uint64_t s = cfg_seed;
    if (const char* env = std::getenv("BEEX_SEED")) s = std::strtoull(env, nullptr, 10);
    if (flag_seed) s = *flag_seed;
    return s;
}

struct TrainArtifacts {
    beex::TrainResult result;
    std::string latent_path, frozen_path;
};

TrainArtifacts run_training(RunConfig rc, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto train_recs = beex::read_tsv(rc.train_tsv, rc.schema);
    const auto dev_recs = beex::read_tsv(rc.dev_tsv, rc.schema);

    beex::Vocabulary vocab = rc.vocab_path.empty() || !fs::exists(rc.vocab_path)
                                 ? beex::Vocabulary::build(beex::record_texts(train_recs))
                                 : beex::Vocabulary::load(rc.vocab_path);
    vocab.save(out_dir + "/vocab.tsv");
    rc.model.vocab_size = vocab.size();

    const auto train_set =
        beex::encode_records(train_recs, vocab, rc.model.max_len, rc.model.classes, "train");
    const auto dev_set =
        beex::encode_records(dev_recs, vocab, rc.model.max_len, rc.model.classes, "dev");

    beex::Model model(rc.model);
    TrainArtifacts art;
    art.result = beex::train(model, train_set, dev_set, rc.train);
    const std::string log_path = out_dir + "/train_log.jsonl";
    if (fs::exists(log_path)) fs::remove(log_path);
    for (const auto& rep : art.result.reports) beex::append_epoch_jsonl(rep, log_path);

    art.latent_path = out_dir + "/latent.ckpt";
    art.frozen_path = out_dir + "/frozen.ckpt";
    beex::save_latent(model, art.latent_path);
    beex::save_frozen(beex::FrozenModel::from(model), art.frozen_path);
    return art;
}

std::vector<double> parse_deltas(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        out.push_back(std::stod(csv.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw beex::config_error("empty delta list");
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"BEExformer: binarized early-exit transformer training and inference"};
    app.require_subcommand(1);

    // build-vocab
    auto* sc_vocab = app.add_subcommand("build-vocab", "Build a vocabulary from a TSV corpus");
    std::string bv_data, bv_out, bv_text = "sentence", bv_text2, bv_label = "label";
    sc_vocab->add_option("--data", bv_data, "training TSV")->required();
    sc_vocab->add_option("--out", bv_out, "output vocabulary path")->required();
    sc_vocab->add_option("--text-col", bv_text, "sentence column name");
    sc_vocab->add_option("--text2-col", bv_text2, "second sentence column (pair tasks)");
    sc_vocab->add_option("--label-col", bv_label, "label column name");

    // train
    auto* sc_train = app.add_subcommand("train", "Train a model from a JSON config");
    std::string tr_config, tr_out, tr_binarizer, tr_slfn;
    std::optional<std::uint64_t> tr_seed;
    bool tr_no_slfn = false;
    sc_train->add_option("--config", tr_config, "JSON config file")->required();
    sc_train->add_option("--seed", tr_seed, "seed override (also BEEX_SEED env)");
    sc_train->add_option("--binarizer", tr_binarizer, "b2|clip");
    sc_train->add_option("--slfn-rule", tr_slfn, "literal|corrected");
    sc_train->add_flag("--no-slfn", tr_no_slfn, "drop the SLFN sublayer (ablation)");
    sc_train->add_option("--out-dir", tr_out, "output directory override");

    // eval
    auto* sc_eval = app.add_subcommand("eval", "Evaluate a frozen checkpoint on a TSV dataset");
    std::string ev_model, ev_data, ev_vocab, ev_out, ev_hist, ev_traces, ev_metric = "accuracy";
    std::string ev_text = "sentence", ev_text2, ev_label = "label";
    double ev_delta = 0.0001;
    bool ev_no_ee = false, ev_float = false;
    sc_eval->add_option("--model", ev_model, "frozen checkpoint")->required();
    sc_eval->add_option("--data", ev_data, "TSV dataset")->required();
    sc_eval->add_option("--vocab", ev_vocab, "vocabulary file")->required();
    sc_eval->add_option("--delta", ev_delta, "EE threshold");
    sc_eval->add_option("--metric", ev_metric, "accuracy|f1|matthews");
    sc_eval->add_option("--text-col", ev_text, "sentence column name");
    sc_eval->add_option("--text2-col", ev_text2, "second sentence column");
    sc_eval->add_option("--label-col", ev_label, "label column name");
    sc_eval->add_flag("--no-ee", ev_no_ee, "disable early exit (WEE ledger)");
    sc_eval->add_flag("--float-path", ev_float, "use the float reference path");
    sc_eval->add_option("--out", ev_out, "report JSON path");
    sc_eval->add_option("--hist", ev_hist, "exit histogram CSV path");
    sc_eval->add_option("--traces", ev_traces, "per-sample trace JSONL path");

    // sweep
    auto* sc_sweep = app.add_subcommand("sweep", "Metric-vs-FLOPs trade-off over a delta list");
    std::string sw_model, sw_data, sw_vocab, sw_out = "sweep.csv", sw_metric = "accuracy";
    std::string sw_deltas = "1e-5,1e-4,1e-3,1e-2";
    std::string sw_text = "sentence", sw_text2, sw_label = "label";
    sc_sweep->add_option("--model", sw_model, "frozen checkpoint")->required();
    sc_sweep->add_option("--data", sw_data, "TSV dataset")->required();
    sc_sweep->add_option("--vocab", sw_vocab, "vocabulary file")->required();
    sc_sweep->add_option("--deltas", sw_deltas, "comma-separated thresholds");
    sc_sweep->add_option("--metric", sw_metric, "accuracy|f1|matthews");
    sc_sweep->add_option("--text-col", sw_text, "sentence column name");
    sc_sweep->add_option("--text2-col", sw_text2, "second sentence column");
    sc_sweep->add_option("--label-col", sw_label, "label column name");
    sc_sweep->add_option("--out", sw_out, "output CSV");

    // ablate
    auto* sc_ablate = app.add_subcommand("ablate", "Binarizer and architecture ablations");
    std::string ab_config;
    std::optional<std::uint64_t> ab_seed;
    std::string ab_binarizer;
    sc_ablate->add_option("--config", ab_config, "JSON config file")->required();
    sc_ablate->add_option("--seed", ab_seed, "seed override");
    sc_ablate->add_option("--binarizer", ab_binarizer,
                          "run only this binarizer variant (b2|clip)");

    // freeze
    auto* sc_freeze = app.add_subcommand("freeze", "Pack a latent checkpoint into a frozen one");
    std::string fr_in, fr_out;
    sc_freeze->add_option("--in", fr_in, "latent checkpoint")->required();
    sc_freeze->add_option("--out", fr_out, "frozen checkpoint")->required();

    // inspect
    auto* sc_inspect = app.add_subcommand("inspect", "Print checkpoint header and size ledger");
    std::string in_ckpt;
    sc_inspect->add_option("--ckpt", in_ckpt, "checkpoint path")->required();

    // make-synth
    auto* sc_synth = app.add_subcommand("make-synth", "Generate a synthetic TSV corpus");
    std::string sy_task = "sentiment", sy_out = "synth";
    std::size_t sy_train = 256, sy_dev = 64, sy_test = 64;
    std::uint64_t sy_seed = 7;
    sc_synth->add_option("--task", sy_task, "sentiment|entailment");
    sc_synth->add_option("--out", sy_out, "output directory");
    sc_synth->add_option("--train-n", sy_train, "training samples");
    sc_synth->add_option("--dev-n", sy_dev, "dev samples");
    sc_synth->add_option("--test-n", sy_test, "test samples");
    sc_synth->add_option("--seed", sy_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    if (sc_vocab->parsed()) {
        beex::TsvSchema schema{bv_text,
                               bv_text2.empty() ? std::nullopt
                                                : std::optional<std::string>(bv_text2),
                               bv_label};
        const auto recs = beex::read_tsv(bv_data, schema);
        beex::Vocabulary::build(beex::record_texts(recs)).save(bv_out);
        std::cout << "wrote vocabulary to " << bv_out << "\n";
        return 0;
    }

    if (sc_train->parsed()) {
        RunConfig rc = parse_run_config(tr_config);
        rc.train.seed = resolve_seed(rc.train.seed, tr_seed);
        rc.model.seed = rc.train.seed;
        if (!tr_binarizer.empty()) rc.model.binarizer = beex::binarizer_from_string(tr_binarizer);
        if (!tr_slfn.empty()) rc.model.slfn_rule = beex::slfn_rule_from_string(tr_slfn);
        if (tr_no_slfn) rc.model.use_slfn = false;
        const std::string out_dir = tr_out.empty() ? rc.out_dir : tr_out;
        const TrainArtifacts art = run_training(rc, out_dir);
        std::cout << "best dev " << beex::to_string(rc.train.metric) << " = "
                  << art.result.best_metric << " at epoch " << art.result.best_epoch << "\n"
                  << "latent checkpoint: " << art.latent_path << "\n"
                  << "frozen checkpoint: " << art.frozen_path << "\n";
        return 0;
    }

    auto eval_dataset = [](const std::string& model_path, const std::string& data_path,
                           const std::string& vocab_path, const std::string& text,
                           const std::string& text2, const std::string& label) {
        const beex::FrozenModel model = beex::load_frozen(model_path);
        const beex::Vocabulary vocab = beex::Vocabulary::load(vocab_path);
        beex::TsvSchema schema{
            text, text2.empty() ? std::nullopt : std::optional<std::string>(text2), label};
        const auto recs = beex::read_tsv(data_path, schema);
        return std::pair{model, beex::encode_records(recs, vocab, model.config().max_len,
                                                     model.config().classes, data_path)};
    };

    if (sc_eval->parsed()) {
        auto [model, data] = eval_dataset(ev_model, ev_data, ev_vocab, ev_text, ev_text2, ev_label);
        const beex::RunReport rep =
            beex::run_eval(model, data, ev_delta, beex::metric_from_string(ev_metric), !ev_no_ee,
                           !ev_float, ev_traces);
        if (!ev_out.empty()) beex::write_report_json(rep, ev_out);
        if (!ev_hist.empty()) beex::write_histogram_csv(rep, ev_hist);
        std::cout << rep.metric_name << " = " << rep.metric << "\n"
                  << "mean exit depth = " << rep.mean_exit_depth << "\n"
                  << "flops/sample (adjusted): ee = " << rep.flops_ee
                  << ", wee = " << rep.flops_wee << ", reduction = " << rep.reduction_pct
                  << "%\n";
        return 0;
    }

    if (sc_sweep->parsed()) {
        auto [model, data] = eval_dataset(sw_model, sw_data, sw_vocab, sw_text, sw_text2, sw_label);
        const auto rows = beex::sweep_delta(model, data, beex::metric_from_string(sw_metric),
                                            parse_deltas(sw_deltas));
        beex::write_sweep_csv(rows, sw_out);
        std::cout << "delta\tmetric\tdepth\tflops\treduction%\n";
        for (const auto& r : rows)
            std::cout << r.delta << '\t' << r.metric << '\t' << r.mean_exit_depth << '\t'
                      << r.flops_ee << '\t' << r.reduction_pct << "\n";
        return 0;
    }

    if (sc_ablate->parsed()) {
        RunConfig base = parse_run_config(ab_config);
        base.train.seed = resolve_seed(base.train.seed, ab_seed);
        base.model.seed = base.train.seed;

        struct Variant {
            std::string name;
            beex::ModelConfig model;
            bool eval_ee;
        };
        std::vector<Variant> variants;
        if (ab_binarizer.empty() || ab_binarizer == "b2")
            variants.push_back({"proposed", base.model, true});
        if (ab_binarizer.empty() || ab_binarizer == "clip") {
            auto m = base.model;
            m.binarizer = beex::Binarizer::Clip;
            variants.push_back({"clip", m, true});
        }
        if (ab_binarizer.empty()) {
            variants.push_back({"wee", base.model, false});
            auto m = base.model;
            m.use_slfn = false;
            variants.push_back({"wslfn", m, true});
        }

        std::cout << "variant\tdev_metric\ttest_metric\tflops/sample\n";
        for (const auto& v : variants) {
            RunConfig rc = base;
            rc.model = v.model;
            const std::string out_dir = rc.out_dir + "/ablate_" + v.name;
            const TrainArtifacts art = run_training(rc, out_dir);
            const beex::FrozenModel frozen = beex::load_frozen(art.frozen_path);
            const beex::Vocabulary vocab = beex::Vocabulary::load(out_dir + "/vocab.tsv");
            const auto test_recs = beex::read_tsv(rc.test_tsv, rc.schema);
            const auto test_set = beex::encode_records(test_recs, vocab, rc.model.max_len,
                                                       rc.model.classes, "test");
            const beex::RunReport rep =
                beex::run_eval(frozen, test_set, rc.train.delta, rc.train.metric, v.eval_ee);
            std::cout << v.name << '\t' << art.result.best_metric << '\t' << rep.metric << '\t'
                      << rep.flops_ee << "\n";
        }
        return 0;
    }

    if (sc_freeze->parsed()) {
        const beex::Model model = beex::load_latent(fr_in);
        beex::save_frozen(beex::FrozenModel::from(model), fr_out);
        std::cout << "froze " << fr_in << " -> " << fr_out << "\n";
        return 0;
    }

    if (sc_inspect->parsed()) {
        const beex::CheckpointInfo info = beex::peek_checkpoint(in_ckpt);
        const beex::SizeLedger ledger = beex::measure_size(in_ckpt);
        std::cout << "format: " << info.format << "\n"
                  << "config: " << beex::model_config_to_json(info.config) << "\n"
                  << "binarized params: " << ledger.binary_params << "\n"
                  << "full-precision params: " << ledger.fp_params << "\n"
                  << "file bytes: " << ledger.file_bytes << "\n"
                  << "frozen-vs-fp32 size ratio: " << ledger.ratio() << "x\n";
        return 0;
    }

    if (sc_synth->parsed()) {
        fs::create_directories(sy_out);
        beex::TsvSchema schema;
        auto gen = [&](std::uint64_t seed, std::size_t n) {
            return sy_task == "entailment" ? beex::synth_entailment(seed, n)
                                           : beex::synth_sentiment(seed, n);
        };
        if (sy_task == "entailment") {
            schema.text_col = "sentence1";
            schema.text2_col = "sentence2";
        }
        beex::write_tsv(sy_out + "/train.tsv", gen(sy_seed, sy_train), schema);
        beex::write_tsv(sy_out + "/dev.tsv", gen(sy_seed + 1, sy_dev), schema);
        beex::write_tsv(sy_out + "/test.tsv", gen(sy_seed + 2, sy_test), schema);
        std::cout << "wrote " << sy_task << " corpus under " << sy_out << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const beex::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const beex::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
