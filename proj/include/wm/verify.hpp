#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wm/schemes.hpp"
#include "wm/toylm.hpp"

namespace wm::verify {

struct VerificationResult {
    std::string check_name;
    std::vector<double> observed;
    std::vector<double> expected;
    double tolerance = 0.0;
    bool passed = false;
    std::uint64_t samples = 0;
    std::string note;

    std::string to_json() const;
};

// Trigamma psi_1(x) via recurrence shift + asymptotic series; |err| < 1e-10 for x > 0.
double trigamma(double x);

// Empirical decode_logits_addition frequencies vs softmax(l); passes when
// total variation <= min(3*sqrt(|V|/n), 0.01 cap at n=1e6).
VerificationResult check_gumbelmax_unbiased(std::span<const double> logits,
                                            std::uint64_t n_samples, std::uint64_t seed);

// Same marginal-law check for the other unbiased decoders.
VerificationResult check_exponential_unbiased(std::span<const double> logits,
                                              std::uint64_t n_samples, std::uint64_t seed);
VerificationResult check_dipmark_unbiased(std::span<const double> logits, double alpha,
                                          std::uint64_t n_samples, std::uint64_t seed);
VerificationResult check_its_unbiased(std::span<const double> logits, std::uint64_t n_samples,
                                      std::uint64_t seed);

// argmax(l+eta) == argmax(log u / p) on every random case; also counts how
// often the two per-token scorers disagree (expected: always).
VerificationResult check_equivalence(std::uint64_t n_cases, std::uint64_t seed);

// Conditional score moments of the Logits-Addition watermark at win
// probability p_w (rejection sampling on a two-token vocabulary), plus the
// unwatermarked Gumbel moments when p_w <= 0.
VerificationResult check_theorem1(double p_w, std::uint64_t n_samples, std::uint64_t seed);
VerificationResult check_theorem1_null(std::uint64_t n_samples, std::uint64_t seed);

// Exponential-watermark analogue: mean lower bound and trigamma variance.
VerificationResult check_exponential_moments(double p_w, std::uint64_t n_samples,
                                             std::uint64_t seed);
VerificationResult check_exponential_null(std::uint64_t n_samples, std::uint64_t seed);

// Null statistic calibration on unwatermarked toy-LM text. Aggregation is
// recomputed here from the raw per-token scores so a schemes-module bug
// cannot certify itself.
VerificationResult check_aggregator_null(const NgramModel& lm, SchemeKind kind,
                                         std::uint64_t n_texts, std::size_t text_len,
                                         std::uint64_t seed);

// Full suite with default sizes; `filter` empty = all.
std::vector<VerificationResult> run_suite(const NgramModel& lm, const std::string& filter,
                                          std::uint64_t n_samples, std::uint64_t seed);

}  // namespace wm::verify
