#include "beex/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace beex {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'E', 'E', 'X'};

json config_to_json_obj(const ModelConfig& cfg) {
    return json{{"vocab_size", cfg.vocab_size},
                {"classes", cfg.classes},
                {"blocks", cfg.blocks},
                {"heads", cfg.heads},
                {"width", cfg.width},
                {"hidden", cfg.hidden},
                {"max_len", cfg.max_len},
                {"dropout", cfg.dropout},
                {"binarizer", to_string(cfg.binarizer)},
                {"slfn_rule", to_string(cfg.slfn_rule)},
                {"share_forget_weights", cfg.share_forget_weights},
                {"use_slfn", cfg.use_slfn},
                {"seed", cfg.seed}};
}

ModelConfig config_from_json_obj(const json& j) {
    ModelConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.classes = j.at("classes").get<std::size_t>();
    cfg.blocks = j.at("blocks").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.width = j.at("width").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.dropout = j.value("dropout", 0.3);
    cfg.binarizer = binarizer_from_string(j.value("binarizer", "b2"));
    cfg.slfn_rule = slfn_rule_from_string(j.value("slfn_rule", "literal"));
    cfg.share_forget_weights = j.value("share_forget_weights", false);
    cfg.use_slfn = j.value("use_slfn", true);
    cfg.seed = j.value("seed", std::uint64_t{1});
    return cfg;
}

void write_f32(std::ofstream& out, const std::vector<double>& v) {
    for (double x : v) {
        const float f = static_cast<float>(x);
        out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

std::vector<double> read_f32(std::ifstream& in, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        float f;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        v[i] = static_cast<double>(f);
    }
    if (!in) throw data_error("checkpoint truncated while reading tensor payload");
    return v;
}

struct Container {
    json header;
    std::string path;
    std::ifstream in;
};

Container open_container(const std::string& path) {
    Container c;
    c.path = path;
    c.in.open(path, std::ios::binary);
    if (!c.in) throw data_error("cannot open checkpoint " + path);
    char magic[4];
    c.in.read(magic, 4);
    if (!c.in || std::memcmp(magic, kMagic, 4) != 0)
        throw data_error("not a BEEX checkpoint: " + path);
    std::uint32_t hlen = 0;
    c.in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    c.in.read(htext.data(), hlen);
    if (!c.in) throw data_error("truncated checkpoint header in " + path);
    try {
        c.header = json::parse(htext);
    } catch (const json::exception& e) {
        throw data_error("corrupt checkpoint header in " + path + ": " + e.what());
    }
    return c;
}

void write_container(const std::string& path, json header,
                     const std::function<void(std::ofstream&)>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write checkpoint " + path);
    const std::string htext = header.dump();
    out.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), htext.size());
    payload(out);
    if (!out) throw data_error("failed writing checkpoint " + path);
}

std::size_t numel(const json& shape) {
    std::size_t n = 1;
    for (const auto& e : shape) n *= e.get<std::size_t>();
    return n;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_to_json_obj(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& json_text) {
    try {
        return config_from_json_obj(json::parse(json_text));
    } catch (const json::exception& e) {
        throw config_error(std::string("bad model config JSON: ") + e.what());
    }
}

void save_latent(const Model& model, const std::string& path) {
    json manifest = json::array();
    for (const Parameter* p : model.parameters())
        manifest.push_back({{"name", p->name},
                            {"shape", p->value.shape()},
                            {"kind", "f32"},
                            {"binarized", p->binarized}});
    json header{{"format", "beex-latent"},
                {"version", 1},
                {"config", config_to_json_obj(model.config())},
                {"tensors", manifest}};
    write_container(path, header, [&](std::ofstream& out) {
        for (const Parameter* p : model.parameters()) write_f32(out, p->value.data());
    });
}

Model load_latent(const std::string& path) {
    Container c = open_container(path);
    if (c.header.at("format") != "beex-latent")
        throw data_error(path + " is not a latent checkpoint");
    Model model(config_from_json_obj(c.header.at("config")));
    auto params = model.parameters();
    const auto& manifest = c.header.at("tensors");
    if (manifest.size() != params.size())
        throw data_error("checkpoint tensor count does not match architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = manifest[i];
        if (entry.at("name") != params[i]->name)
            throw data_error("checkpoint tensor order mismatch at " + params[i]->name);
        params[i]->value.mutable_data() = read_f32(c.in, numel(entry.at("shape")));
    }
    return model;
}

void save_frozen(const FrozenModel& model, const std::string& path) {
    json manifest = json::array();
    model.for_each_packed([&](const std::string& name, const PackedMatrix& p) {
        manifest.push_back({{"name", name},
                            {"shape", {p.rows, p.cols}},
                            {"kind", "bits"},
                            {"words", p.words.size()}});
    });
    model.for_each_fp([&](const std::string& name, const Tensor& t) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}, {"kind", "f32"}});
    });
    json header{{"format", "beex-frozen"},
                {"version", 1},
                {"config", config_to_json_obj(model.config())},
                {"tensors", manifest}};
    write_container(path, header, [&](std::ofstream& out) {
        model.for_each_packed([&](const std::string&, const PackedMatrix& p) {
            out.write(reinterpret_cast<const char*>(p.words.data()),
                      static_cast<std::streamsize>(p.words.size() * sizeof(std::uint64_t)));
        });
        model.for_each_fp([&](const std::string&, const Tensor& t) { write_f32(out, t.data()); });
    });
}

FrozenModel load_frozen(const std::string& path) {
    Container c = open_container(path);
    if (c.header.at("format") != "beex-frozen")
        throw data_error(path + " is not a frozen checkpoint");
    const ModelConfig cfg = config_from_json_obj(c.header.at("config"));
    std::unordered_map<std::string, PackedMatrix> packed;
    std::unordered_map<std::string, Tensor> fp;
    for (const auto& entry : c.header.at("tensors")) {
        const std::string name = entry.at("name");
        if (entry.at("kind") == "bits") {
            PackedMatrix p;
            p.rows = entry.at("shape")[0].get<std::size_t>();
            p.cols = entry.at("shape")[1].get<std::size_t>();
            p.words_per_row = (p.cols + 63) / 64;
            p.words.resize(entry.at("words").get<std::size_t>());
            c.in.read(reinterpret_cast<char*>(p.words.data()),
                      static_cast<std::streamsize>(p.words.size() * sizeof(std::uint64_t)));
            if (!c.in) throw data_error("checkpoint truncated while reading " + name);
            packed[name] = std::move(p);
        } else {
            std::vector<std::size_t> shape;
            for (const auto& e : entry.at("shape")) shape.push_back(e.get<std::size_t>());
            fp[name] = Tensor::from(shape, read_f32(c.in, numel(entry.at("shape"))));
        }
    }
    return FrozenModel::assemble(cfg, packed, fp);
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    Container c = open_container(path);
    return {c.header.at("format").get<std::string>(),
            config_from_json_obj(c.header.at("config"))};
}

SizeLedger measure_size(const std::string& path) {
    Container c = open_container(path);
    SizeLedger ledger;
    const bool frozen = c.header.at("format") == "beex-frozen";
    for (const auto& entry : c.header.at("tensors")) {
        const std::size_t n = numel(entry.at("shape"));
        const bool bin = frozen ? entry.at("kind") == "bits" : entry.value("binarized", false);
        if (bin)
            ledger.binary_params += n;
        else
            ledger.fp_params += n;
    }
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    ledger.file_bytes = static_cast<std::uint64_t>(f.tellg());
    return ledger;
}

}  // namespace beex
