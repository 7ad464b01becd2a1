// text.hpp
// Word-level vocabulary, trainable caption encoder, and sentence pooling.
#pragma once

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "mmtk/nn.hpp"

namespace mmtk {

// Lowercase, strip punctuation to spaces, split on whitespace.
inline std::vector<std::string> tokenize_caption(const std::string& text) {
    std::string norm;
    norm.reserve(text.size());
    for (unsigned char c : text) {
        if (std::isalnum(c))
            norm.push_back(static_cast<char>(std::tolower(c)));
        else
            norm.push_back(' ');
    }
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < norm.size()) {
        while (i < norm.size() && norm[i] == ' ') ++i;
        std::size_t j = i;
        while (j < norm.size() && norm[j] != ' ') ++j;
        if (j > i) words.push_back(norm.substr(i, j - i));
        i = j;
    }
    return words;
}

class TextVocab {
public:
    static constexpr int PAD = 0;
    static constexpr int UNK = 1;

    static TextVocab from_words(std::vector<std::string> words) {
        TextVocab v;
        v.words_ = std::move(words);
        for (std::size_t i = 0; i < v.words_.size(); ++i) {
            require(!v.words_[i].empty(), "vocab: empty word");
            auto [it, fresh] = v.index_.emplace(v.words_[i], static_cast<int>(i) + 2);
            require(fresh, "vocab: duplicate word '" + v.words_[i] + "'");
        }
        return v;
    }

    int size() const { return static_cast<int>(words_.size()) + 2; }

    int lookup(const std::string& word) const {
        auto it = index_.find(word);
        return it == index_.end() ? UNK : it->second;
    }

    const std::vector<std::string>& words() const { return words_; }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

inline TextVocab build_vocab(const std::vector<std::string>& corpus, int min_count = 1) {
    require(!corpus.empty(), "build_vocab: empty corpus");
    std::map<std::string, int> counts;
    for (const std::string& sentence : corpus)
        for (const std::string& w : tokenize_caption(sentence)) counts[w] += 1;
    std::vector<std::string> kept;
    for (const auto& [w, c] : counts)
        if (c >= min_count) kept.push_back(w);
    return TextVocab::from_words(std::move(kept));
}

inline std::vector<int> encode_ids(const std::string& sentence, const TextVocab& vocab) {
    std::vector<int> ids;
    for (const std::string& w : tokenize_caption(sentence)) ids.push_back(vocab.lookup(w));
    require(!ids.empty(), "encode_text: sentence is empty after normalization");
    return ids;
}

inline void add_text_params(ParamStore& ps, const TextVocab& vocab, int channels, int layers,
                            int ffn_mult, std::uint64_t seed) {
    ps.add("text.embed", init_trunc_normal({vocab.size(), channels}, seed, "text.embed"));
    add_encoder(ps, "text.enc", channels, layers, ffn_mult, seed);
}

// N_l x C token features for one caption.
inline Tensor encode_text(ParamStore& ps, const std::string& sentence, const TextVocab& vocab,
                          int layers, int heads) {
    std::vector<int> ids = encode_ids(sentence, vocab);
    Tensor emb = embedding_rows(ps.at("text.embed"), ids);
    Tensor x = add(emb, sine_positions(emb.rows(), emb.cols()));
    return encoder_forward(ps, "text.enc", x, layers, heads);
}

// 1 x C sentence feature, the mean over token rows.
inline Tensor pool_sentence(const Tensor& f_l) {
    detail::require_matrix(f_l, "pool_sentence");
    return mean_rows(f_l);
}

}  // namespace mmtk
