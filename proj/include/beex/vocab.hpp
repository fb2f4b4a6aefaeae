#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "beex/errors.hpp"

namespace beex {

inline constexpr int kPadId = 0;
inline const std::string kSepToken = "<sep>";

// One-to-one token<->id map. Id 0 is reserved for padding; real tokens get
// ids 1..|V|; id |V|+1 is the out-of-vocabulary bucket at inference.
class Vocabulary {
public:
    static Vocabulary build(const std::vector<std::string>& texts, bool with_sep = true);

    int id_of(const std::string& token) const;  // unk_id() when absent
    const std::string& token_of(int id) const;
    bool contains(const std::string& token) const { return ids_.count(token) > 0; }
    std::size_t size() const { return tokens_.size(); }  // |V|, excludes pad/unk
    int unk_id() const { return static_cast<int>(size()) + 1; }
    int sep_id() const { return id_of(kSepToken); }
    // embedding table rows: pad + |V| tokens + unk
    std::size_t table_rows() const { return size() + 2; }

    void add(const std::string& token);
    void save(const std::string& path) const;  // UTF-8 "token<TAB>id" lines
    static Vocabulary load(const std::string& path);

private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_;  // tokens_[i] has id i+1
};

// Lowercase, split on whitespace and punctuation (apostrophes kept inside
// words are dropped like other punctuation).
std::vector<std::string> split_tokens(const std::string& text);

struct TokenSequence {
    std::vector<int> ids;        // length l, zero-padded tail
    std::size_t true_length = 0; // positions before padding
};

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len);

// Sentence pairs are joined with the reserved <sep> token before encoding.
TokenSequence tokenize_pair(const std::string& a, const std::string& b, const Vocabulary& vocab,
                            std::size_t max_len);

}  // namespace beex
