#include "beex/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace beex {

namespace {

std::vector<std::string> split_tsv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

std::vector<RawRecord> read_tsv(const std::string& path, const TsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open TSV file " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty TSV file " + path);
    const auto header = split_tsv_line(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    auto index_of = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw data_error("TSV " + path + " has no column '" + name + "'");
        return it->second;
    };
    const std::size_t ti = index_of(schema.text_col);
    const std::size_t li = index_of(schema.label_col);
    std::optional<std::size_t> t2i;
    if (schema.text2_col) t2i = index_of(*schema.text2_col);

    std::vector<RawRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_tsv_line(line);
        if (fields.size() != header.size())
            throw data_error(path + ":" + std::to_string(lineno) + ": wrong field count");
        RawRecord r;
        r.text = fields[ti];
        if (t2i) r.text2 = fields[*t2i];
        try {
            r.label = std::stoi(fields[li]);
        } catch (const std::exception&) {
            throw data_error(path + ":" + std::to_string(lineno) + ": non-integer label");
        }
        out.push_back(std::move(r));
    }
    return out;
}

Dataset encode_records(const std::vector<RawRecord>& records, const Vocabulary& vocab,
                       std::size_t max_len, std::size_t num_classes, const std::string& name) {
    Dataset d;
    d.name = name;
    for (const auto& r : records) {
        if (r.label < 0 || static_cast<std::size_t>(r.label) >= num_classes)
            throw data_error("label " + std::to_string(r.label) + " out of range in " + name);
        Sample s;
        s.seq = r.text2 ? tokenize_pair(r.text, *r.text2, vocab, max_len)
                        : tokenize(r.text, vocab, max_len);
        if (s.seq.true_length == 0) continue;  // skip empty sentences
        s.label = r.label;
        d.samples.push_back(std::move(s));
    }
    if (d.samples.empty()) throw data_error("dataset " + name + " is empty");
    return d;
}

std::vector<std::string> record_texts(const std::vector<RawRecord>& records) {
    std::vector<std::string> out;
    for (const auto& r : records) {
        out.push_back(r.text);
        if (r.text2) out.push_back(*r.text2);
    }
    return out;
}

void write_tsv(const std::string& path, const std::vector<RawRecord>& records,
               const TsvSchema& schema) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write TSV file " + path);
    out << schema.text_col;
    if (schema.text2_col) out << '\t' << *schema.text2_col;
    out << '\t' << schema.label_col << '\n';
    for (const auto& r : records) {
        out << r.text;
        if (schema.text2_col) out << '\t' << (r.text2 ? *r.text2 : "");
        out << '\t' << r.label << '\n';
    }
}

Metric metric_from_string(const std::string& s) {
    if (s == "accuracy") return Metric::Accuracy;
    if (s == "f1") return Metric::F1;
    if (s == "matthews") return Metric::Matthews;
    throw config_error("unknown metric '" + s + "'");
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::Accuracy: return "accuracy";
        case Metric::F1: return "f1";
        default: return "matthews";
    }
}

double compute_metric(Metric m, const std::vector<int>& predictions,
                      const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw contract_error("compute_metric: size mismatch");
    const std::size_t n = predictions.size();
    if (m == Metric::Accuracy) {
        std::size_t ok = 0;
        for (std::size_t i = 0; i < n; ++i) ok += predictions[i] == labels[i];
        return static_cast<double>(ok) / static_cast<double>(n);
    }
    if (m == Metric::F1) {
        // binary F1 with positive class 1
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (predictions[i] == 1 && labels[i] == 1) ++tp;
            if (predictions[i] == 1 && labels[i] != 1) ++fp;
            if (predictions[i] != 1 && labels[i] == 1) ++fn;
        }
        if (tp == 0) return 0.0;
        return 2.0 * tp / (2.0 * tp + fp + fn);
    }
    // multi-class Matthews correlation from the confusion matrix
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) k = std::max({k, predictions[i] + 1, labels[i] + 1});
    std::vector<double> conf(static_cast<std::size_t>(k) * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) conf[labels[i] * k + predictions[i]] += 1.0;
    double correct = 0, total = static_cast<double>(n);
    std::vector<double> pred_k(k, 0.0), true_k(k, 0.0);
    for (int a = 0; a < k; ++a) {
        correct += conf[a * k + a];
        for (int b = 0; b < k; ++b) {
            true_k[a] += conf[a * k + b];
            pred_k[b] += conf[a * k + b];
        }
    }
    double cross = 0, p2 = 0, t2 = 0;
    for (int a = 0; a < k; ++a) {
        cross += pred_k[a] * true_k[a];
        p2 += pred_k[a] * pred_k[a];
        t2 += true_k[a] * true_k[a];
    }
    const double denom = std::sqrt(total * total - p2) * std::sqrt(total * total - t2);
    if (denom == 0.0) return 0.0;
    return (correct * total - cross) / denom;
}

namespace {

const std::vector<std::string> kPositive = {"good", "great", "happy", "fine",  "nice",
                                            "love", "joy",   "win",   "bright", "sweet"};
const std::vector<std::string> kNegative = {"bad",  "sad",   "awful", "poor",  "hate",
                                            "gloom", "lose", "dark",  "bitter", "wrong"};
const std::vector<std::string> kEntities = {"river", "stone", "cloud", "tiger", "wheel",
                                            "lamp",  "boat",  "tree",  "glass", "horse",
                                            "bridge", "tower"};

std::vector<std::string> filler_pool() {
    std::vector<std::string> pool;
    for (int i = 0; i < 160; ++i) pool.push_back("w" + std::to_string(i));
    return pool;
}

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) s.push_back(' ');
        s += words[i];
    }
    return s;
}

}  // namespace

std::vector<RawRecord> synth_sentiment(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    const auto fillers = filler_pool();
    std::uniform_int_distribution<std::size_t> len_dist(5, 12);
    std::uniform_int_distribution<std::size_t> fill_dist(0, fillers.size() - 1);
    std::uniform_int_distribution<std::size_t> kw_dist(0, kPositive.size() - 1);
    std::vector<RawRecord> out;
    while (out.size() < n) {
        const std::size_t len = len_dist(rng);
        // majority polarity leads by at least two keywords
        std::uniform_int_distribution<std::size_t> count_dist(2, std::min<std::size_t>(4, len / 2));
        std::size_t np = count_dist(rng);
        std::size_t nn = std::uniform_int_distribution<std::size_t>(0, np - 2)(rng);
        if (rng() & 1) std::swap(np, nn);
        std::vector<std::string> words;
        for (std::size_t i = 0; i < np && words.size() < len; ++i)
            words.push_back(kPositive[kw_dist(rng)]);
        for (std::size_t i = 0; i < nn && words.size() < len; ++i)
            words.push_back(kNegative[kw_dist(rng)]);
        while (words.size() < len) words.push_back(fillers[fill_dist(rng)]);
        std::shuffle(words.begin(), words.end(), rng);
        out.push_back({join(words), std::nullopt, np > nn ? 1 : 0});
    }
    return out;
}

std::vector<RawRecord> synth_entailment(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    const auto fillers = filler_pool();
    std::uniform_int_distribution<std::size_t> fill_dist(0, fillers.size() - 1);
    std::uniform_int_distribution<std::size_t> ent_dist(0, kEntities.size() - 1);
    std::uniform_int_distribution<std::size_t> na_dist(2, 4);
    std::uniform_int_distribution<std::size_t> pad_dist(3, 8);
    std::bernoulli_distribution entail(0.5);
    std::vector<RawRecord> out;
    while (out.size() < n) {
        std::unordered_set<std::size_t> a_set;
        const std::size_t na = na_dist(rng);
        while (a_set.size() < na) a_set.insert(ent_dist(rng));
        std::vector<std::string> a_words;
        for (auto id : a_set) a_words.push_back(kEntities[id]);
        for (std::size_t i = pad_dist(rng); i > 0; --i) a_words.push_back(fillers[fill_dist(rng)]);
        std::shuffle(a_words.begin(), a_words.end(), rng);

        const bool positive = entail(rng);
        std::vector<std::string> b_words;
        std::vector<std::size_t> a_list(a_set.begin(), a_set.end());
        std::uniform_int_distribution<std::size_t> pick(0, a_list.size() - 1);
        b_words.push_back(kEntities[a_list[pick(rng)]]);
        if (!positive) {
            std::size_t alien = ent_dist(rng);
            while (a_set.count(alien)) alien = ent_dist(rng);
            b_words.push_back(kEntities[alien]);
        }
        for (std::size_t i = pad_dist(rng) / 2 + 1; i > 0; --i)
            b_words.push_back(fillers[fill_dist(rng)]);
        std::shuffle(b_words.begin(), b_words.end(), rng);

        out.push_back({join(a_words), join(b_words), positive ? 1 : 0});
    }
    return out;
}

}  // namespace beex
