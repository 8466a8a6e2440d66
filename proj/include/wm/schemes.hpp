#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wm/core.hpp"
#include "wm/keyrand.hpp"
#include "wm/toylm.hpp"

namespace wm {

enum class SchemeKind { logits_addition, exponential, kgw, dipmark, its };
enum class VariantKind { vanilla, softmax_temp, drop, shift };

std::string to_string(SchemeKind k);
std::string to_string(VariantKind v);
SchemeKind scheme_kind_from_string(const std::string& s);
VariantKind variant_kind_from_string(const std::string& s);

struct SchemeConfig {
    SchemeKind kind = SchemeKind::logits_addition;
    VariantKind variant = VariantKind::vanilla;
    double tau = 0.3;           // softmax variant temperature
    double drop_p = 0.0;        // drop variant bypass probability
    int shift_max = 0;          // shift variant: r drawn from {0..shift_max}
    std::uint64_t sk = 0;       // secret key
    int h = 4;                  // context width
    TokenId pad_token = 0;
    double kgw_delta = 2.0;
    double kgw_gamma = 0.5;
    double dipmark_alpha = 0.45;
    double dipmark_gamma = 0.5;
    std::uint64_t its_master_seed = 0;
    std::uint32_t its_n_keys = 256;

    void validate(std::size_t vocab_size) const;  // throws std::invalid_argument

    std::string to_json() const;
    static SchemeConfig from_json(const std::string& text);
};

struct DetectionReport {
    std::vector<double> scores;
    double statistic = 0.0;
    double threshold = 0.0;
    bool decision = false;
    std::size_t token_count = 0;
    std::optional<int> best_shift;
};

// Default detection thresholds: 1% one-sided normal tail for the z-type
// aggregators, calibration-driven for ITS.
inline constexpr double kDefaultEpsilon = 2.326;
inline constexpr double kDefaultEpsilonIts = -0.30;
double default_epsilon(SchemeKind kind);

// --- decoders -------------------------------------------------------------
TokenId decode_logits_addition(std::span<const double> l, std::span<const double> xi_gumbel);
TokenId decode_exponential(std::span<const double> p, std::span<const double> xi_uniform);
TokenId decode_gumbelsoft(std::span<const double> l, std::span<const double> xi_gumbel,
                          double tau, double u);
TokenId decode_exp_softmax(std::span<const double> p, std::span<const double> xi_uniform,
                           double tau, double u);
TokenId decode_kgw(std::span<const double> l, std::span<const std::uint8_t> mask, double delta,
                   double u);
TokenId decode_dipmark(std::span<const double> p, std::span<const std::uint32_t> perm,
                       double alpha, double u);
TokenId decode_its(std::span<const double> p, double mu, std::span<const std::uint32_t> perm);

// Reweighted masses over original token ids; the lambda-difference law behind
// decode_dipmark, exposed for oracle tests.
std::vector<double> dipmark_masses(std::span<const double> p, std::span<const std::uint32_t> perm,
                                   double alpha);

// --- scorers --------------------------------------------------------------
double score_logits_addition(std::span<const double> xi_gumbel, TokenId w);
double score_exponential(std::span<const double> xi_uniform, TokenId w);
double score_kgw(std::span<const std::uint8_t> mask, TokenId w);
double score_dipmark(std::span<const std::uint32_t> perm, TokenId w, double gamma);
double score_its(double mu, std::span<const std::uint32_t> perm, TokenId w);

// --- aggregators ----------------------------------------------------------
double aggregate_logits_addition(std::span<const double> scores);
double aggregate_exponential(std::span<const double> scores);
double aggregate_kgw(std::span<const double> scores, double gamma);
double aggregate_dipmark(std::span<const double> scores, double gamma);
double aggregate_its(std::span<const double> scores);

// --- generation -----------------------------------------------------------

// Per-response sampling randomness (drop decisions, softmax draws, shift r).
// Independent of sk; the detector never needs it.
class SessionRng {
public:
    explicit SessionRng(std::uint64_t seed) : state_(seed) {}

    double next_unit() {  // in [0, 1)
        state_ = finalize64(state_ + kGolden64);
        return static_cast<double>(state_ >> 11) * 0x1p-53;
    }

    std::size_t next_below(std::size_t n) {  // uniform over {0..n-1}
        auto r = static_cast<std::size_t>(next_unit() * static_cast<double>(n));
        return r >= n ? n - 1 : r;
    }

private:
    std::uint64_t state_;
};

// Watermarked completion of `length` tokens after `prompt`. Prompt tokens
// participate in key contexts but are not part of the returned sequence.
TokenSequence generate_completion(const NgramModel& lm, const SchemeConfig& cfg,
                                  std::span<const TokenId> prompt, std::size_t length,
                                  SessionRng& session);

// Plain temperature-1 ancestral sampling, no watermark.
TokenSequence sample_plain(const NgramModel& lm, std::span<const TokenId> prompt,
                           std::size_t length, SessionRng& session);

// --- detection ------------------------------------------------------------

// Re-derives keys for each position of `tokens` (contexts may extend into
// `preceding`, e.g. the prompt), scores, aggregates, and compares with
// epsilon. Shift variant: statistic maximized over r in {0..shift_max}.
DetectionReport detect(std::span<const TokenId> tokens, std::span<const TokenId> preceding,
                       const SchemeConfig& cfg, double epsilon, std::size_t vocab_size);

}  // namespace wm
