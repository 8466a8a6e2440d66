#include "wm/keyrand.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wm {

std::uint64_t derive_seed(std::uint64_t sk, std::span<const TokenId> context) {
    std::uint64_t state = sk;
    for (TokenId x : context) {
        std::uint64_t mixed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) + 1) * kGolden64;
        state = finalize64(state ^ mixed);
    }
    return state;
}

double KeyStream::gumbel_at(std::uint64_t i) const {
    return -std::log(-std::log(uniform_at(i)));
}

std::vector<double> uniform_vector(KeyStream stream, std::size_t size) {
    std::vector<double> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = stream.uniform_at(i);
    return out;
}

std::vector<double> gumbel_vector(KeyStream stream, std::size_t size) {
    std::vector<double> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = stream.gumbel_at(i);
    return out;
}

std::vector<std::uint32_t> permutation(KeyStream stream, std::size_t size) {
    if (size == 0) throw std::invalid_argument("permutation: size must be >= 1");
    std::vector<std::uint32_t> perm(size);
    std::iota(perm.begin(), perm.end(), 0u);
    std::uint64_t ctr = 0;
    for (std::size_t i = size - 1; i >= 1; --i) {
        double u = stream.uniform_at(ctr++);
        auto j = static_cast<std::size_t>(u * static_cast<double>(i + 1));
        if (j > i) j = i;
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

std::vector<std::uint8_t> green_mask(KeyStream stream, std::size_t size, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("green_mask: gamma must lie in (0,1)");
    auto perm = permutation(stream, size);
    std::vector<std::uint8_t> mask(size, 0);
    auto greens = static_cast<std::size_t>(gamma * static_cast<double>(size));
    for (std::size_t j = 0; j < greens; ++j) mask[perm[j]] = 1;
    return mask;
}

std::vector<double> cyclic_shift_key(std::span<const double> xi, std::size_t r) {
    if (r >= xi.size()) throw std::invalid_argument("cyclic_shift_key: r must be < |V|");
    std::vector<double> out(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) out[i] = xi[(i + r) % xi.size()];
    return out;
}

TokenSequence ContextWindow::at(std::span<const TokenId> tokens, std::size_t t) const {
    auto h = static_cast<std::size_t>(width_h);
    TokenSequence ctx(h, pad_token);
    std::size_t have = std::min(h, t);
    for (std::size_t k = 0; k < have; ++k) ctx[h - have + k] = tokens[t - have + k];
    return ctx;
}

GlobalKeyList::Entry GlobalKeyList::entry(std::uint64_t t, std::size_t vocab_size) const {
    if (n_keys == 0) throw std::invalid_argument("GlobalKeyList: n_keys must be positive");
    auto idx = static_cast<TokenId>(t % n_keys);
    KeyStream mu_stream{derive_seed(master_seed, std::array<TokenId, 2>{idx, 0})};
    KeyStream pi_stream{derive_seed(master_seed, std::array<TokenId, 2>{idx, 1})};
    return Entry{mu_stream.uniform_at(0), permutation(pi_stream, vocab_size)};
}

}  // namespace wm
