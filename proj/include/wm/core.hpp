#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace wm {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Euler-Mascheroni constant; mean of Gumbel(0,1).
inline constexpr double kEulerGamma = 0.5772156649015329;

// Smallest/largest uniform draw we ever hand to a log(): keeps -log(-log u) finite.
inline constexpr double kUnitEps = 0x1p-53;

inline double clamp_unit(double u) {
    if (u < kUnitEps) return kUnitEps;
    if (u > 1.0 - kUnitEps) return 1.0 - kUnitEps;
    return u;
}

// Dense token id <-> surface mapping. Ids are contiguous in [0, size()).
class Vocabulary {
public:
    Vocabulary() = default;

    TokenId add(const std::string& surface);  // returns existing id if present
    TokenId id_of(const std::string& surface) const;  // -1 if absent
    const std::string& surface_of(TokenId id) const;
    std::size_t size() const { return id_to_surface_.size(); }

    // Line-oriented JSON: {"id": i, "surface": "..."} per line, ids increasing from 0.
    std::string to_jsonl() const;
    static Vocabulary from_jsonl(const std::string& text);

private:
    std::vector<std::string> id_to_surface_;
    std::unordered_map<std::string, TokenId> surface_to_id_;
};

double log_sum_exp(std::span<const double> v);

// Max-subtraction stable softmax of v / temperature. Throws on temperature <= 0
// or non-finite input.
std::vector<double> softmax(std::span<const double> v, double temperature = 1.0);

// Smallest index attaining the maximum. Throws on empty input.
std::size_t argmax_with_tiebreak(std::span<const double> v);

// Inverse-CDF draw: smallest i with sum(p[0..i]) > u. p must sum to 1 within 1e-9.
std::size_t categorical_sample(std::span<const double> p, double u);

}  // namespace wm
