#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wm/core.hpp"

namespace wm {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

// SplitMix64 output permutation; the single mixing primitive behind every
// key derivation. Bit-exact across platforms.
constexpr std::uint64_t finalize64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Folds (sk, t_1..t_h) into a stream seed: state starts at sk, then one
// finalize64(state XOR (x+1)*golden) step per token.
std::uint64_t derive_seed(std::uint64_t sk, std::span<const TokenId> context);

// Counter-based uniform stream: value at index i depends only on (seed, i).
struct KeyStream {
    std::uint64_t seed = 0;

    double uniform_at(std::uint64_t i) const {
        std::uint64_t bits = finalize64(seed + (i + 1) * kGolden64);
        return clamp_unit(static_cast<double>(bits >> 11) * 0x1p-53);
    }

    // Standard Gumbel(0,1) via inverse CDF of the stream value at index i.
    double gumbel_at(std::uint64_t i) const;
};

std::vector<double> uniform_vector(KeyStream stream, std::size_t size);
std::vector<double> gumbel_vector(KeyStream stream, std::size_t size);

// Fisher-Yates over [0,size), traversed from size-1 down to 1; swap partner
// floor(u*(i+1)) with one stream index consumed per step.
std::vector<std::uint32_t> permutation(KeyStream stream, std::size_t size);

// mask[perm[j]] = 1 for j < floor(gamma*size), else 0.
std::vector<std::uint8_t> green_mask(KeyStream stream, std::size_t size, double gamma);

// out[i] = xi[(i + r) mod size]. Throws if r >= size.
std::vector<double> cyclic_shift_key(std::span<const double> xi, std::size_t r);

// Left context of width h ending just before position t, left-padded with
// pad_token when fewer than h tokens precede t.
struct ContextWindow {
    int width_h = 0;
    TokenId pad_token = 0;

    TokenSequence at(std::span<const TokenId> tokens, std::size_t t) const;
};

// Position-indexed (mu, pi) key list for the inverse-transform-sampling scheme.
// Entries are a pure function of (master_seed, index, vocab_size); indices wrap
// modulo n_keys.
struct GlobalKeyList {
    std::uint64_t master_seed = 0;
    std::uint32_t n_keys = 256;

    struct Entry {
        double mu;
        std::vector<std::uint32_t> pi;
    };

    Entry entry(std::uint64_t t, std::size_t vocab_size) const;
};

}  // namespace wm
