#pragma once

#include <optional>
#include <string>
#include <vector>

#include "beex/vocab.hpp"

namespace beex {

struct Sample {
    TokenSequence seq;
    int label = 0;
};

struct Dataset {
    std::string name;
    std::vector<Sample> samples;
    std::size_t size() const { return samples.size(); }
};

// GLUE-style TSV with a header row: one or two sentence columns plus an
// integer label column, all addressed by name.
struct TsvSchema {
    std::string text_col = "sentence";
    std::optional<std::string> text2_col;  // set for pair tasks
    std::string label_col = "label";
};

struct RawRecord {
    std::string text;
    std::optional<std::string> text2;
    int label = 0;
};

std::vector<RawRecord> read_tsv(const std::string& path, const TsvSchema& schema);

Dataset encode_records(const std::vector<RawRecord>& records, const Vocabulary& vocab,
                       std::size_t max_len, std::size_t num_classes, const std::string& name);

std::vector<std::string> record_texts(const std::vector<RawRecord>& records);

void write_tsv(const std::string& path, const std::vector<RawRecord>& records,
               const TsvSchema& schema);

enum class Metric { Accuracy, F1, Matthews };
Metric metric_from_string(const std::string& s);
std::string to_string(Metric m);
double compute_metric(Metric m, const std::vector<int>& predictions,
                      const std::vector<int>& labels);

// Deterministic synthetic corpora for desk-scale runs: keyword-sentiment
// (label = majority of planted polarity keywords) and pair-entailment
// (label = keyword set of B contained in A's).
std::vector<RawRecord> synth_sentiment(std::uint64_t seed, std::size_t n);
std::vector<RawRecord> synth_entailment(std::uint64_t seed, std::size_t n);

}  // namespace beex
