#include "wm/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace wm::eval {
namespace {

std::string pack_ngram(std::span<const TokenId> gram) {
    std::string key(gram.size() * sizeof(TokenId), '\0');
    std::memcpy(key.data(), gram.data(), key.size());
    return key;
}

std::unordered_map<std::string, std::size_t> ngram_counts(std::span<const TokenId> tokens, int n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
        ++counts[pack_ngram(tokens.subspan(i, static_cast<std::size_t>(n)))];
    return counts;
}

// Completion log-likelihood with the prompt available as context.
double completion_perplexity(const NgramModel& lm, std::span<const TokenId> prompt,
                             std::span<const TokenId> completion) {
    TokenSequence all(prompt.begin(), prompt.end());
    all.insert(all.end(), completion.begin(), completion.end());
    double log_sum = 0.0;
    for (std::size_t t = 0; t < completion.size(); ++t) {
        auto p = softmax(lm.logits(std::span<const TokenId>(all).first(prompt.size() + t)));
        log_sum += std::log(std::max(p[static_cast<std::size_t>(completion[t])],
                                     std::numeric_limits<double>::min()));
    }
    return std::exp(-log_sum / static_cast<double>(completion.size()));
}

}  // namespace

double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw std::invalid_argument("auroc: both score lists must be non-empty");
    struct Item {
        double score;
        bool pos;
    };
    std::vector<Item> items;
    items.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) items.push_back({s, true});
    for (double s : neg_scores) items.push_back({s, false});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    // midranks over tie groups
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (items[k].pos) rank_sum_pos += midrank;
        i = j;
    }
    auto np = static_cast<double>(pos_scores.size());
    auto nn = static_cast<double>(neg_scores.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

std::vector<double> threshold_grid(std::span<const double> pos, std::span<const double> neg) {
    std::vector<double> grid(pos.begin(), pos.end());
    grid.insert(grid.end(), neg.begin(), neg.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.push_back(std::numeric_limits<double>::infinity());  // "reject everything"
    return grid;
}

double frac_ge(std::span<const double> sorted, double theta) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), theta);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

}  // namespace

double fnr_at_fpr(std::span<const double> pos, std::span<const double> neg, double fpr_cap) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("fnr_at_fpr: empty scores");
    std::vector<double> ps(pos.begin(), pos.end()), ns(neg.begin(), neg.end());
    std::sort(ps.begin(), ps.end());
    std::sort(ns.begin(), ns.end());
    for (double theta : threshold_grid(pos, neg))
        if (frac_ge(ns, theta) <= fpr_cap) return 1.0 - frac_ge(ps, theta);
    return 1.0;
}

double fpr_at_fnr(std::span<const double> pos, std::span<const double> neg, double fnr_cap) {
    if (pos.empty() || neg.empty()) throw std::invalid_argument("fpr_at_fnr: empty scores");
    std::vector<double> ps(pos.begin(), pos.end()), ns(neg.begin(), neg.end());
    std::sort(ps.begin(), ps.end());
    std::sort(ns.begin(), ns.end());
    auto grid = threshold_grid(pos, neg);
    for (auto it = grid.rbegin(); it != grid.rend(); ++it)
        if (1.0 - frac_ge(ps, *it) <= fnr_cap) return frac_ge(ns, *it);
    return 1.0;
}

double bleu(std::span<const TokenId> candidate, const std::vector<TokenSequence>& references,
            int max_n) {
    if (references.empty() || candidate.empty()) return 0.0;
    int effective_n = std::min<int>(max_n, static_cast<int>(candidate.size()));
    double log_precision = 0.0;
    for (int n = 1; n <= effective_n; ++n) {
        auto cand_counts = ngram_counts(candidate, n);
        std::unordered_map<std::string, std::size_t> max_ref;
        for (const auto& ref : references)
            for (const auto& [gram, c] : ngram_counts(ref, n))
                max_ref[gram] = std::max(max_ref[gram], c);
        std::size_t clipped = 0, total = 0;
        for (const auto& [gram, c] : cand_counts) {
            total += c;
            auto it = max_ref.find(gram);
            clipped += std::min(c, it == max_ref.end() ? std::size_t{0} : it->second);
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_precision += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    log_precision /= static_cast<double>(effective_n);
    // brevity penalty against the closest reference length (shorter on ties)
    auto c_len = static_cast<double>(candidate.size());
    double best_ref = static_cast<double>(references[0].size());
    for (const auto& ref : references) {
        auto r = static_cast<double>(ref.size());
        if (std::abs(r - c_len) < std::abs(best_ref - c_len) ||
            (std::abs(r - c_len) == std::abs(best_ref - c_len) && r < best_ref))
            best_ref = r;
    }
    double bp = best_ref <= c_len ? 1.0 : std::exp(1.0 - best_ref / c_len);
    return bp * std::exp(log_precision);
}

double self_bleu(const std::vector<TokenSequence>& completions, int max_n) {
    if (completions.size() < 2)
        throw std::invalid_argument("self_bleu: need at least two completions");
    double sum = 0.0;
    for (std::size_t i = 0; i < completions.size(); ++i) {
        std::vector<TokenSequence> refs;
        refs.reserve(completions.size() - 1);
        for (std::size_t j = 0; j < completions.size(); ++j)
            if (j != i) refs.push_back(completions[j]);
        sum += bleu(completions[i], refs, max_n);
    }
    return sum / static_cast<double>(completions.size());
}

double distinct_n(const std::vector<TokenSequence>& completions, int n) {
    std::unordered_map<std::string, std::size_t> all;
    std::size_t total = 0;
    for (const auto& c : completions)
        for (const auto& [gram, cnt] : ngram_counts(c, n)) {
            all[gram] += cnt;
            total += cnt;
        }
    if (total == 0) throw std::invalid_argument("distinct_n: no n-grams");
    return static_cast<double>(all.size()) / static_cast<double>(total);
}

TokenSequence substitution_attack(const TokenSequence& text, double rho, const NgramModel& lm,
                                  SessionRng& rng) {
    if (rho < 0 || rho > 1) throw std::invalid_argument("substitution_attack: rho outside [0,1]");
    TokenSequence out = text;
    for (auto& tok : out)
        if (rng.next_unit() < rho)
            tok = static_cast<TokenId>(categorical_sample(lm.unigram_probs(), rng.next_unit()));
    return out;
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ExperimentSpec spec;
    for (const auto& s : j.at("schemes")) {
        SchemeSpec ss;
        ss.id = s.at("id").get<std::string>();
        ss.config = SchemeConfig::from_json(s.dump());
        spec.schemes.push_back(std::move(ss));
    }
    spec.prompts = j.at("prompts").get<std::vector<std::string>>();
    if (j.contains("repeats")) spec.repeats = j["repeats"].get<std::size_t>();
    if (j.contains("length")) spec.length = j["length"].get<std::size_t>();
    if (j.contains("detection_lengths"))
        spec.detection_lengths = j["detection_lengths"].get<std::vector<std::size_t>>();
    if (j.contains("substitution_rho")) spec.substitution_rho = j["substitution_rho"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("epsilon_z")) spec.epsilon_z = j["epsilon_z"].get<double>();
    if (j.contains("epsilon_its")) spec.epsilon_its = j["epsilon_its"].get<double>();
    if (j.contains("threads")) spec.threads = j["threads"].get<int>();
    for (std::size_t l : spec.detection_lengths)
        if (l > spec.length)
            throw std::invalid_argument("ExperimentSpec: detection length exceeds generation length");
    return spec;
}

std::string ExperimentSpec::to_json() const {
    nlohmann::json j;
    for (const auto& s : schemes) {
        auto sj = nlohmann::json::parse(s.config.to_json());
        sj["id"] = s.id;
        j["schemes"].push_back(sj);
    }
    j["prompts"] = prompts;
    j["repeats"] = repeats;
    j["length"] = length;
    j["detection_lengths"] = detection_lengths;
    if (substitution_rho) j["substitution_rho"] = *substitution_rho;
    j["seed"] = seed;
    j["epsilon_z"] = epsilon_z;
    j["epsilon_its"] = epsilon_its;
    j["threads"] = threads;
    return j.dump(2);
}

namespace {

struct Task {
    std::size_t scheme_idx;
    std::size_t prompt_idx;
    std::size_t repeat;
};

struct TaskOutput {
    TokenSequence watermarked;
    TokenSequence unwatermarked;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const NgramModel& lm) {
    if (spec.schemes.empty() || spec.prompts.empty())
        throw std::invalid_argument("run_experiment: schemes and prompts must be non-empty");
    std::size_t v = lm.vocab_size();
    for (const auto& s : spec.schemes) s.config.validate(v);

    std::vector<TokenSequence> prompt_tokens;
    prompt_tokens.reserve(spec.prompts.size());
    for (const auto& p : spec.prompts)
        prompt_tokens.push_back(tokenize_words(p, lm.vocab(), lm.unk_token()));

    // generation fan-out: every task owns a labeled substream, so results are
    // identical regardless of worker count
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < spec.schemes.size(); ++s)
        for (std::size_t p = 0; p < spec.prompts.size(); ++p)
            for (std::size_t r = 0; r < spec.repeats; ++r) tasks.push_back({s, p, r});
    std::vector<TaskOutput> outputs(tasks.size());

    auto run_task = [&](std::size_t idx) {
        const Task& t = tasks[idx];
        const auto& cfg = spec.schemes[t.scheme_idx].config;
        const auto& prompt = prompt_tokens[t.prompt_idx];
        std::array<TokenId, 4> label{static_cast<TokenId>(t.scheme_idx),
                                     static_cast<TokenId>(t.prompt_idx),
                                     static_cast<TokenId>(t.repeat), 0};
        SessionRng wm_rng(derive_seed(spec.seed, label));
        outputs[idx].watermarked = generate_completion(lm, cfg, prompt, spec.length, wm_rng);
        label[3] = 1;
        SessionRng plain_rng(derive_seed(spec.seed, label));
        outputs[idx].unwatermarked = sample_plain(lm, prompt, spec.length, plain_rng);
        if (spec.substitution_rho) {
            label[3] = 2;
            SessionRng attack_rng(derive_seed(spec.seed, label));
            outputs[idx].watermarked =
                substitution_attack(outputs[idx].watermarked, *spec.substitution_rho, lm, attack_rng);
            label[3] = 3;
            SessionRng attack_rng2(derive_seed(spec.seed, label));
            outputs[idx].unwatermarked = substitution_attack(outputs[idx].unwatermarked,
                                                             *spec.substitution_rho, lm, attack_rng2);
        }
    };

    int n_threads = std::max(1, spec.threads);
    if (n_threads == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                    run_task(i);
            });
        for (auto& th : pool) th.join();
    }

    ExperimentResult result;
    for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
        const auto& scheme = spec.schemes[s];
        double eps = scheme.config.kind == SchemeKind::its ? spec.epsilon_its : spec.epsilon_z;

        // diversity + quality at full generation length, per-prompt grouping
        double sb_sum = 0.0, ppl_sum = 0.0;
        std::size_t ppl_count = 0;
        std::vector<TokenSequence> all_completions;
        for (std::size_t p = 0; p < spec.prompts.size(); ++p) {
            std::vector<TokenSequence> group;
            for (std::size_t idx = 0; idx < tasks.size(); ++idx)
                if (tasks[idx].scheme_idx == s && tasks[idx].prompt_idx == p) {
                    group.push_back(outputs[idx].watermarked);
                    all_completions.push_back(outputs[idx].watermarked);
                    ppl_sum += completion_perplexity(lm, prompt_tokens[p], outputs[idx].watermarked);
                    ++ppl_count;
                }
            if (group.size() >= 2) sb_sum += self_bleu(group);
            else sb_sum += 1.0;  // single completion: degenerate group
        }
        double sb = sb_sum / static_cast<double>(spec.prompts.size());
        double d1 = distinct_n(all_completions, 1);
        double d2 = distinct_n(all_completions, 2);
        double ppl = ppl_sum / static_cast<double>(ppl_count);

        for (std::size_t det_len : spec.detection_lengths) {
            std::vector<double> pos, neg;
            for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
                if (tasks[idx].scheme_idx != s) continue;
                const auto& prompt = prompt_tokens[tasks[idx].prompt_idx];
                for (bool watermarked : {true, false}) {
                    const auto& full =
                        watermarked ? outputs[idx].watermarked : outputs[idx].unwatermarked;
                    TokenSequence trunc(full.begin(),
                                        full.begin() + static_cast<std::ptrdiff_t>(
                                                           std::min(det_len, full.size())));
                    auto report = detect(trunc, prompt, scheme.config, eps, v);
                    (watermarked ? pos : neg).push_back(report.statistic);
                    result.scores.push_back({scheme.id, det_len, watermarked,
                                             tasks[idx].prompt_idx, tasks[idx].repeat,
                                             report.statistic});
                }
            }
            MetricsRow row;
            row.scheme_id = scheme.id;
            row.detection_length = det_len;
            row.auroc = auroc(pos, neg);
            row.fpr_at_fnr01 = fpr_at_fnr(pos, neg);
            row.fnr_at_fpr01 = fnr_at_fpr(pos, neg);
            row.self_bleu = sb;
            row.distinct1 = d1;
            row.distinct2 = d2;
            row.perplexity = ppl;
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "scheme_id,detection_length,auroc,fpr_at_fnr01,fnr_at_fpr01,self_bleu,distinct1,"
           "distinct2,perplexity\n";
    out.precision(6);
    for (const auto& r : rows)
        out << r.scheme_id << ',' << r.detection_length << ',' << r.auroc << ',' << r.fpr_at_fnr01
            << ',' << r.fnr_at_fpr01 << ',' << r.self_bleu << ',' << r.distinct1 << ','
            << r.distinct2 << ',' << r.perplexity << '\n';
    return out.str();
}

std::string scores_jsonl(const std::vector<ScoreRecord>& scores) {
    std::ostringstream out;
    for (const auto& s : scores) {
        nlohmann::json j{{"scheme_id", s.scheme_id},   {"detection_length", s.detection_length},
                         {"watermarked", s.watermarked}, {"prompt_id", s.prompt_id},
                         {"repeat", s.repeat},          {"statistic", s.statistic}};
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace wm::eval
