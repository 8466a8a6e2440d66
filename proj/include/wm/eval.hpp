#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wm/schemes.hpp"
#include "wm/toylm.hpp"

namespace wm::eval {

// Rank-based (Mann-Whitney) AUROC; ties count 0.5.
double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores);

// FNR at the smallest threshold whose empirical FPR <= fpr_cap.
double fnr_at_fpr(std::span<const double> pos, std::span<const double> neg, double fpr_cap = 0.01);
// FPR at the largest threshold whose empirical FNR <= fnr_cap.
double fpr_at_fnr(std::span<const double> pos, std::span<const double> neg, double fnr_cap = 0.01);

// Mean over completions of BLEU(candidate=i, references=all others); standard
// geometric mean of modified 1..max_n-gram precisions with brevity penalty.
double self_bleu(const std::vector<TokenSequence>& completions, int max_n = 4);
double bleu(std::span<const TokenId> candidate, const std::vector<TokenSequence>& references,
            int max_n = 4);

// unique n-grams across all completions / total n-gram count.
double distinct_n(const std::vector<TokenSequence>& completions, int n);

// Each position independently replaced with probability rho by a draw from
// the model's unigram distribution.
TokenSequence substitution_attack(const TokenSequence& text, double rho, const NgramModel& lm,
                                  SessionRng& rng);

struct SchemeSpec {
    std::string id;
    SchemeConfig config;
};

struct ExperimentSpec {
    std::vector<SchemeSpec> schemes;
    std::vector<std::string> prompts;
    std::size_t repeats = 10;
    std::size_t length = 100;
    std::vector<std::size_t> detection_lengths = {40, 60, 100};
    std::optional<double> substitution_rho;
    std::uint64_t seed = 0;
    double epsilon_z = kDefaultEpsilon;
    double epsilon_its = kDefaultEpsilonIts;
    int threads = 1;

    static ExperimentSpec from_json(const std::string& text);
    std::string to_json() const;
};

struct MetricsRow {
    std::string scheme_id;
    std::size_t detection_length = 0;
    double auroc = 0.0;
    double fpr_at_fnr01 = 0.0;
    double fnr_at_fpr01 = 0.0;
    double self_bleu = 0.0;
    double distinct1 = 0.0;
    double distinct2 = 0.0;
    double perplexity = 0.0;
};

struct ScoreRecord {
    std::string scheme_id;
    std::size_t detection_length = 0;
    bool watermarked = false;
    std::size_t prompt_id = 0;
    std::size_t repeat = 0;
    double statistic = 0.0;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    std::vector<ScoreRecord> scores;
};

// Generates watermarked + unwatermarked completions per scheme, optionally
// attacks both, detects at every detection length, computes all metrics.
// Deterministic given spec.seed, independent of thread count.
ExperimentResult run_experiment(const ExperimentSpec& spec, const NgramModel& lm);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string scores_jsonl(const std::vector<ScoreRecord>& scores);

}  // namespace wm::eval
