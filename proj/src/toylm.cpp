#include "wm/toylm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace wm {
namespace {

// Floor for log(0) when smoothing is zero: exp(-700) underflows to 0 but the
// logit stays finite.
constexpr double kLogFloor = -700.0;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("NgramModel::load: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t lo = get_u32(in);
    std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

double get_f64(std::istream& in) {
    std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
    std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("NgramModel::load: truncated file");
    return s;
}

}  // namespace

std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

TokenSequence tokenize_words(const std::string& text, const Vocabulary& vocab, TokenId unk) {
    TokenSequence out;
    for (const auto& w : split_whitespace(text)) {
        TokenId id = vocab.id_of(w);
        out.push_back(id < 0 ? unk : id);
    }
    return out;
}

std::string NgramModel::pack_context(std::span<const TokenId> ctx) {
    std::string key(ctx.size() * sizeof(TokenId), '\0');
    if (!ctx.empty()) std::memcpy(key.data(), ctx.data(), key.size());
    return key;
}

NgramModel NgramModel::train(const std::string& corpus_text, int order, double smoothing,
                             double entropy_boost) {
    if (order < 1) throw std::invalid_argument("NgramModel::train: order must be >= 1");
    if (smoothing < 0) throw std::invalid_argument("NgramModel::train: smoothing must be >= 0");
    NgramModel m;
    m.order_ = order;
    m.smoothing_ = smoothing;
    m.set_entropy_boost(entropy_boost);
    m.pad_id_ = m.vocab_.add(kPadSurface);
    m.unk_id_ = m.vocab_.add(kUnkSurface);

    auto words = split_whitespace(corpus_text);
    if (words.empty()) throw std::invalid_argument("NgramModel::train: empty corpus");
    TokenSequence tokens;
    tokens.reserve(words.size());
    for (const auto& w : words) tokens.push_back(m.vocab_.add(w));
    m.trained_tokens_ = tokens.size();

    m.counts_.resize(static_cast<std::size_t>(order));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        for (int len = 0; len < order; ++len) {
            if (static_cast<std::size_t>(len) > t) break;
            std::span<const TokenId> ctx(tokens.data() + t - len, static_cast<std::size_t>(len));
            auto& cc = m.counts_[static_cast<std::size_t>(len)][pack_context(ctx)];
            ++cc.total;
            ++cc.per_token[tokens[t]];
        }
    }
    m.rebuild_unigram();
    return m;
}

void NgramModel::set_entropy_boost(double b) {
    if (!(b > 0)) throw std::invalid_argument("NgramModel: entropy_boost must be positive");
    entropy_boost_ = b;
}

void NgramModel::rebuild_unigram() {
    std::size_t v = vocab_.size();
    unigram_probs_.assign(v, 0.0);
    const auto& root = counts_[0].at(std::string());
    double denom = static_cast<double>(root.total) + smoothing_ * static_cast<double>(v);
    for (std::size_t i = 0; i < v; ++i) {
        auto it = root.per_token.find(static_cast<TokenId>(i));
        double c = it == root.per_token.end() ? 0.0 : static_cast<double>(it->second);
        unigram_probs_[i] = (c + smoothing_) / denom;
    }
}

std::vector<double> NgramModel::logits(std::span<const TokenId> context) const {
    std::size_t v = vocab_.size();
    std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), context.size());
    const ContextCounts* cc = nullptr;
    for (std::size_t len = max_len;; --len) {
        std::span<const TokenId> ctx(context.data() + context.size() - len, len);
        auto it = counts_[len].find(pack_context(ctx));
        if (it != counts_[len].end() && it->second.total > 0) {
            cc = &it->second;
            break;
        }
        if (len == 0) break;
    }
    std::vector<double> l(v, 0.0);
    if (cc == nullptr) {  // cannot happen after training, but keep total
        for (auto& x : l) x = -std::log(static_cast<double>(v)) / entropy_boost_;
        return l;
    }
    double denom = std::log(static_cast<double>(cc->total) + smoothing_ * static_cast<double>(v));
    for (std::size_t i = 0; i < v; ++i) {
        auto it = cc->per_token.find(static_cast<TokenId>(i));
        double c = it == cc->per_token.end() ? 0.0 : static_cast<double>(it->second);
        double num = c + smoothing_;
        double raw = num > 0.0 ? std::log(num) - denom : kLogFloor;
        l[i] = raw / entropy_boost_;
    }
    return l;
}

double NgramModel::perplexity(std::span<const TokenId> text) const {
    if (text.empty()) throw std::invalid_argument("NgramModel::perplexity: empty text");
    double log_sum = 0.0;
    for (std::size_t t = 0; t < text.size(); ++t) {
        auto l = logits(text.first(t));
        auto p = softmax(l);
        double pw = p[static_cast<std::size_t>(text[t])];
        log_sum += std::log(std::max(pw, std::numeric_limits<double>::min()));
    }
    return std::exp(-log_sum / static_cast<double>(text.size()));
}

double NgramModel::mean_entropy(std::span<const TokenId> text) const {
    if (text.empty()) throw std::invalid_argument("NgramModel::mean_entropy: empty text");
    double total = 0.0;
    for (std::size_t t = 0; t < text.size(); ++t) {
        auto p = softmax(logits(text.first(t)));
        double h = 0.0;
        for (double x : p)
            if (x > 0) h -= x * std::log(x);
        total += h;
    }
    return total / static_cast<double>(text.size());
}

void NgramModel::save(std::ostream& out) const {
    out.write("WMLM", 4);
    put_u32(out, 1);  // version
    put_u32(out, static_cast<std::uint32_t>(order_));
    put_f64(out, smoothing_);
    put_f64(out, entropy_boost_);
    put_u32(out, static_cast<std::uint32_t>(vocab_.size()));
    for (std::size_t i = 0; i < vocab_.size(); ++i)
        put_str(out, vocab_.surface_of(static_cast<TokenId>(i)));
    put_u64(out, trained_tokens_);
    for (const auto& level : counts_) {
        put_u64(out, level.size());
        // deterministic file bytes: contexts written in sorted key order
        std::vector<const std::string*> keys;
        keys.reserve(level.size());
        for (const auto& [k, _] : level) keys.push_back(&k);
        std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
        for (const auto* k : keys) {
            const auto& cc = level.at(*k);
            put_str(out, *k);
            put_u64(out, cc.total);
            put_u32(out, static_cast<std::uint32_t>(cc.per_token.size()));
            std::vector<std::pair<TokenId, std::uint32_t>> rows(cc.per_token.begin(),
                                                                cc.per_token.end());
            std::sort(rows.begin(), rows.end());
            for (auto [tok, c] : rows) {
                put_u32(out, static_cast<std::uint32_t>(tok));
                put_u32(out, c);
            }
        }
    }
}

NgramModel NgramModel::load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "WMLM", 4) != 0)
        throw std::runtime_error("NgramModel::load: bad magic");
    std::uint32_t version = get_u32(in);
    if (version != 1) throw std::runtime_error("NgramModel::load: unsupported version");
    NgramModel m;
    m.order_ = static_cast<int>(get_u32(in));
    m.smoothing_ = get_f64(in);
    m.entropy_boost_ = get_f64(in);
    std::uint32_t v = get_u32(in);
    for (std::uint32_t i = 0; i < v; ++i) m.vocab_.add(get_str(in));
    m.pad_id_ = m.vocab_.id_of(kPadSurface);
    m.unk_id_ = m.vocab_.id_of(kUnkSurface);
    m.trained_tokens_ = get_u64(in);
    m.counts_.resize(static_cast<std::size_t>(m.order_));
    for (auto& level : m.counts_) {
        std::uint64_t n_ctx = get_u64(in);
        for (std::uint64_t c = 0; c < n_ctx; ++c) {
            std::string key = get_str(in);
            ContextCounts cc;
            cc.total = get_u64(in);
            std::uint32_t rows = get_u32(in);
            for (std::uint32_t r = 0; r < rows; ++r) {
                auto tok = static_cast<TokenId>(get_u32(in));
                cc.per_token[tok] = get_u32(in);
            }
            level.emplace(std::move(key), std::move(cc));
        }
    }
    m.rebuild_unigram();
    return m;
}

void NgramModel::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("NgramModel::save_file: cannot open " + path);
    save(out);
    if (!out) throw std::runtime_error("NgramModel::save_file: write failed");
}

NgramModel NgramModel::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("NgramModel::load_file: cannot open " + path);
    return load(in);
}

}  // namespace wm
