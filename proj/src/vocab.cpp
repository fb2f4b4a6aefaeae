#include "beex/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace beex {

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch) || ch == '<' || ch == '>') {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, bool with_sep) {
    Vocabulary v;
    if (with_sep) v.add(kSepToken);
    for (const auto& t : texts)
        for (const auto& tok : split_tokens(t)) v.add(tok);
    return v;
}

void Vocabulary::add(const std::string& token) {
    if (ids_.count(token)) return;
    tokens_.push_back(token);
    ids_[token] = static_cast<int>(tokens_.size());
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 1 || static_cast<std::size_t>(id) > tokens_.size())
        throw data_error("token_of: id out of range");
    return tokens_[static_cast<std::size_t>(id) - 1];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write vocabulary to " + path);
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        out << tokens_[i] << '\t' << (i + 1) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read vocabulary from " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw data_error("malformed vocabulary line: " + line);
        const std::string token = line.substr(0, tab);
        const int id = std::stoi(line.substr(tab + 1));
        v.add(token);
        if (v.id_of(token) != id)
            throw data_error("vocabulary ids must be dense and ordered in " + path);
    }
    return v;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
    const auto words = split_tokens(text);
    TokenSequence seq;
    seq.ids.assign(max_len, kPadId);
    seq.true_length = std::min(words.size(), max_len);
    for (std::size_t i = 0; i < seq.true_length; ++i) seq.ids[i] = vocab.id_of(words[i]);
    return seq;
}

TokenSequence tokenize_pair(const std::string& a, const std::string& b, const Vocabulary& vocab,
                            std::size_t max_len) {
    return tokenize(a + " " + kSepToken + " " + b, vocab, max_len);
}

}  // namespace beex
