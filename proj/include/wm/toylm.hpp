#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "wm/core.hpp"

namespace wm {

// Whitespace tokenization against a closed vocabulary. Unknown surfaces map
// to the model's unk token.
TokenSequence tokenize_words(const std::string& text, const Vocabulary& vocab, TokenId unk);
std::vector<std::string> split_whitespace(const std::string& text);

// Word-level n-gram model with additive smoothing and shorter-context backoff.
// Immutable after training; logits() is a pure function of (model, context).
class NgramModel {
public:
    static constexpr const char* kPadSurface = "<pad>";
    static constexpr const char* kUnkSurface = "<unk>";

    // Counts every window of length 1..n over the tokenized corpus.
    static NgramModel train(const std::string& corpus_text, int order, double smoothing,
                            double entropy_boost = 1.0);

    // l[i] = (log(count(ctx,i)+k) - log(total+k|V|)) / entropy_boost, using the
    // longest context suffix with observed mass (backoff down to unigram).
    // With k == 0, zero-count tokens get a large negative finite floor.
    std::vector<double> logits(std::span<const TokenId> context) const;

    // exp(-(1/T) sum log p(w_t | preceding tokens of text)).
    double perplexity(std::span<const TokenId> text) const;

    // Mean softmax entropy (nats) over the n-1 length contexts of `text`.
    double mean_entropy(std::span<const TokenId> text) const;

    const Vocabulary& vocab() const { return vocab_; }
    std::size_t vocab_size() const { return vocab_.size(); }
    int order() const { return order_; }
    double smoothing() const { return smoothing_; }
    double entropy_boost() const { return entropy_boost_; }
    void set_entropy_boost(double b);
    TokenId pad_token() const { return pad_id_; }
    TokenId unk_token() const { return unk_id_; }

    // Unigram sampling distribution (used by the substitution attack).
    const std::vector<double>& unigram_probs() const { return unigram_probs_; }

    // Length-prefixed little-endian binary layout; byte-order independent.
    void save(std::ostream& out) const;
    static NgramModel load(std::istream& in);
    void save_file(const std::string& path) const;
    static NgramModel load_file(const std::string& path);

    std::size_t trained_tokens() const { return trained_tokens_; }

private:
    struct ContextCounts {
        std::uint64_t total = 0;
        std::unordered_map<TokenId, std::uint32_t> per_token;
    };

    static std::string pack_context(std::span<const TokenId> ctx);

    int order_ = 1;
    double smoothing_ = 0.1;
    double entropy_boost_ = 1.0;
    Vocabulary vocab_;
    TokenId pad_id_ = 0;
    TokenId unk_id_ = 1;
    std::size_t trained_tokens_ = 0;
    // counts_[len] maps packed contexts of length `len` to successor counts.
    std::vector<std::unordered_map<std::string, ContextCounts>> counts_;
    std::vector<double> unigram_probs_;

    void rebuild_unigram();
};

}  // namespace wm
