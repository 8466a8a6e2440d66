#include "wm/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wm {
namespace {

constexpr double kSqrt6OverPi = 0.7796968012336793;  // sqrt(6)/pi

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

std::uint64_t parse_u64_flexible(const nlohmann::json& j, const char* field) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        std::size_t pos = 0;
        std::uint64_t v = s.starts_with("0x") || s.starts_with("0X")
                              ? std::stoull(s.substr(2), &pos, 16)
                              : std::stoull(s, &pos, 10);
        return v;
    }
    throw std::invalid_argument(std::string("SchemeConfig: field '") + field +
                                "' must be an integer or decimal/0x string");
}

}  // namespace

std::string to_string(SchemeKind k) {
    switch (k) {
        case SchemeKind::logits_addition: return "logits_addition";
        case SchemeKind::exponential: return "exponential";
        case SchemeKind::kgw: return "kgw";
        case SchemeKind::dipmark: return "dipmark";
        case SchemeKind::its: return "its";
    }
    throw std::invalid_argument("to_string: bad SchemeKind");
}

std::string to_string(VariantKind v) {
    switch (v) {
        case VariantKind::vanilla: return "vanilla";
        case VariantKind::softmax_temp: return "softmax";
        case VariantKind::drop: return "drop";
        case VariantKind::shift: return "shift";
    }
    throw std::invalid_argument("to_string: bad VariantKind");
}

SchemeKind scheme_kind_from_string(const std::string& s) {
    if (s == "logits_addition") return SchemeKind::logits_addition;
    if (s == "exponential") return SchemeKind::exponential;
    if (s == "kgw") return SchemeKind::kgw;
    if (s == "dipmark") return SchemeKind::dipmark;
    if (s == "its") return SchemeKind::its;
    throw std::invalid_argument("unknown scheme kind: " + s);
}

VariantKind variant_kind_from_string(const std::string& s) {
    if (s == "vanilla") return VariantKind::vanilla;
    if (s == "softmax") return VariantKind::softmax_temp;
    if (s == "drop") return VariantKind::drop;
    if (s == "shift") return VariantKind::shift;
    throw std::invalid_argument("unknown variant: " + s);
}

void SchemeConfig::validate(std::size_t vocab_size) const {
    bool gm = kind == SchemeKind::logits_addition || kind == SchemeKind::exponential;
    if (variant != VariantKind::vanilla && !gm)
        throw std::invalid_argument("SchemeConfig: variant '" + to_string(variant) +
                                    "' only valid for logits_addition/exponential");
    if (!(tau > 0)) throw std::invalid_argument("SchemeConfig: tau must be positive");
    if (drop_p < 0 || drop_p > 1) throw std::invalid_argument("SchemeConfig: drop_p outside [0,1]");
    if (shift_max < 0 || static_cast<std::size_t>(shift_max) >= vocab_size)
        throw std::invalid_argument("SchemeConfig: shift_max must lie in [0, |V|)");
    if (h < 0) throw std::invalid_argument("SchemeConfig: h must be >= 0");
    if (pad_token < 0 || static_cast<std::size_t>(pad_token) >= vocab_size)
        throw std::invalid_argument("SchemeConfig: pad_token outside vocabulary");
    if (!(kgw_gamma > 0 && kgw_gamma < 1))
        throw std::invalid_argument("SchemeConfig: kgw_gamma outside (0,1)");
    if (!(dipmark_gamma > 0 && dipmark_gamma < 1))
        throw std::invalid_argument("SchemeConfig: dipmark_gamma outside (0,1)");
    if (dipmark_alpha < 0 || dipmark_alpha > 0.5)
        throw std::invalid_argument("SchemeConfig: dipmark_alpha outside [0,0.5]");
    if (its_n_keys == 0) throw std::invalid_argument("SchemeConfig: its_n_keys must be positive");
}

std::string SchemeConfig::to_json() const {
    nlohmann::json j{
        {"kind", to_string(kind)},
        {"variant", to_string(variant)},
        {"tau", tau},
        {"drop_p", drop_p},
        {"shift_max", shift_max},
        {"sk", sk},
        {"h", h},
        {"pad_token", pad_token},
        {"kgw_delta", kgw_delta},
        {"kgw_gamma", kgw_gamma},
        {"dipmark_alpha", dipmark_alpha},
        {"dipmark_gamma", dipmark_gamma},
        {"its_master_seed", its_master_seed},
        {"its_n_keys", its_n_keys},
    };
    return j.dump();
}

SchemeConfig SchemeConfig::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    SchemeConfig c;
    c.kind = scheme_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("variant")) c.variant = variant_kind_from_string(j["variant"].get<std::string>());
    if (j.contains("tau")) c.tau = j["tau"].get<double>();
    if (j.contains("drop_p")) c.drop_p = j["drop_p"].get<double>();
    if (j.contains("shift_max")) c.shift_max = j["shift_max"].get<int>();
    if (j.contains("sk")) c.sk = parse_u64_flexible(j["sk"], "sk");
    if (j.contains("h")) c.h = j["h"].get<int>();
    if (j.contains("pad_token")) c.pad_token = j["pad_token"].get<TokenId>();
    if (j.contains("kgw_delta")) c.kgw_delta = j["kgw_delta"].get<double>();
    if (j.contains("kgw_gamma")) c.kgw_gamma = j["kgw_gamma"].get<double>();
    if (j.contains("dipmark_alpha")) c.dipmark_alpha = j["dipmark_alpha"].get<double>();
    if (j.contains("dipmark_gamma")) c.dipmark_gamma = j["dipmark_gamma"].get<double>();
    if (j.contains("its_master_seed"))
        c.its_master_seed = parse_u64_flexible(j["its_master_seed"], "its_master_seed");
    if (j.contains("its_n_keys")) c.its_n_keys = j["its_n_keys"].get<std::uint32_t>();
    return c;
}

double default_epsilon(SchemeKind kind) {
    return kind == SchemeKind::its ? kDefaultEpsilonIts : kDefaultEpsilon;
}

// --- decoders ---------------------------------------------------------------

TokenId decode_logits_addition(std::span<const double> l, std::span<const double> xi_gumbel) {
    require_same_size(l.size(), xi_gumbel.size(), "decode_logits_addition");
    std::size_t best = 0;
    double best_v = l[0] + xi_gumbel[0];
    for (std::size_t i = 1; i < l.size(); ++i) {
        double v = l[i] + xi_gumbel[i];
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return static_cast<TokenId>(best);
}

TokenId decode_exponential(std::span<const double> p, std::span<const double> xi_uniform) {
    require_same_size(p.size(), xi_uniform.size(), "decode_exponential");
    std::size_t best = 0;
    double best_v = std::log(xi_uniform[0]) / p[0];
    for (std::size_t i = 1; i < p.size(); ++i) {
        double v = std::log(xi_uniform[i]) / p[i];
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return static_cast<TokenId>(best);
}

TokenId decode_gumbelsoft(std::span<const double> l, std::span<const double> xi_gumbel,
                          double tau, double u) {
    require_same_size(l.size(), xi_gumbel.size(), "decode_gumbelsoft");
    std::vector<double> combined(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) combined[i] = l[i] + xi_gumbel[i];
    return static_cast<TokenId>(categorical_sample(softmax(combined, tau), u));
}

TokenId decode_exp_softmax(std::span<const double> p, std::span<const double> xi_uniform,
                           double tau, double u) {
    require_same_size(p.size(), xi_uniform.size(), "decode_exp_softmax");
    std::vector<double> v(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) v[i] = std::log(xi_uniform[i]) / p[i];
    return static_cast<TokenId>(categorical_sample(softmax(v, tau), u));
}

TokenId decode_kgw(std::span<const double> l, std::span<const std::uint8_t> mask, double delta,
                   double u) {
    require_same_size(l.size(), mask.size(), "decode_kgw");
    std::vector<double> biased(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) biased[i] = l[i] + delta * mask[i];
    return static_cast<TokenId>(categorical_sample(softmax(biased, 1.0), u));
}

std::vector<double> dipmark_masses(std::span<const double> p, std::span<const std::uint32_t> perm,
                                   double alpha) {
    require_same_size(p.size(), perm.size(), "dipmark_masses");
    if (alpha < 0 || alpha > 0.5) throw std::invalid_argument("dipmark: alpha outside [0,0.5]");
    std::vector<double> masses(p.size());
    double cum = 0.0, prev_lambda = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) {
        cum += p[perm[j]];
        double lambda = std::max(cum - alpha, 0.0) + std::max(cum - (1.0 - alpha), 0.0);
        masses[perm[j]] = lambda - prev_lambda;
        prev_lambda = lambda;
    }
    return masses;
}

TokenId decode_dipmark(std::span<const double> p, std::span<const std::uint32_t> perm,
                       double alpha, double u) {
    require_same_size(p.size(), perm.size(), "decode_dipmark");
    if (alpha < 0 || alpha > 0.5) throw std::invalid_argument("dipmark: alpha outside [0,0.5]");
    if (u < 0.0 || u >= 1.0) throw std::invalid_argument("decode_dipmark: u outside [0,1)");
    // lambda is the reweighted CDF along the permuted order; inverse-CDF on it
    double cum = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) {
        cum += p[perm[j]];
        double lambda = std::max(cum - alpha, 0.0) + std::max(cum - (1.0 - alpha), 0.0);
        if (lambda > u) return static_cast<TokenId>(perm[j]);
    }
    return static_cast<TokenId>(perm[perm.size() - 1]);
}

TokenId decode_its(std::span<const double> p, double mu, std::span<const std::uint32_t> perm) {
    require_same_size(p.size(), perm.size(), "decode_its");
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("decode_its: mu outside (0,1)");
    double cum = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) {
        cum += p[perm[j]];
        if (cum >= mu) return static_cast<TokenId>(perm[j]);
    }
    return static_cast<TokenId>(perm[perm.size() - 1]);
}

// --- scorers ----------------------------------------------------------------

double score_logits_addition(std::span<const double> xi_gumbel, TokenId w) {
    if (w < 0 || static_cast<std::size_t>(w) >= xi_gumbel.size())
        throw std::invalid_argument("score_logits_addition: token out of range");
    return xi_gumbel[static_cast<std::size_t>(w)];
}

double score_exponential(std::span<const double> xi_uniform, TokenId w) {
    if (w < 0 || static_cast<std::size_t>(w) >= xi_uniform.size())
        throw std::invalid_argument("score_exponential: token out of range");
    return -std::log(1.0 - xi_uniform[static_cast<std::size_t>(w)]);
}

double score_kgw(std::span<const std::uint8_t> mask, TokenId w) {
    if (w < 0 || static_cast<std::size_t>(w) >= mask.size())
        throw std::invalid_argument("score_kgw: token out of range");
    return static_cast<double>(mask[static_cast<std::size_t>(w)]);
}

double score_dipmark(std::span<const std::uint32_t> perm, TokenId w, double gamma) {
    std::size_t v = perm.size();
    if (w < 0 || static_cast<std::size_t>(w) >= v)
        throw std::invalid_argument("score_dipmark: token out of range");
    auto cut = static_cast<std::size_t>(gamma * static_cast<double>(v));
    for (std::size_t j = cut; j < v; ++j)
        if (perm[j] == static_cast<std::uint32_t>(w)) return 1.0;
    return 0.0;
}

double score_its(double mu, std::span<const std::uint32_t> perm, TokenId w) {
    std::size_t v = perm.size();
    if (w < 0 || static_cast<std::size_t>(w) >= v)
        throw std::invalid_argument("score_its: token out of range");
    if (v < 2) throw std::invalid_argument("score_its: |V| must be >= 2");
    std::size_t rank = 0;
    for (std::size_t j = 0; j < v; ++j)
        if (perm[j] == static_cast<std::uint32_t>(w)) {
            rank = j;
            break;
        }
    double eta = static_cast<double>(rank) / static_cast<double>(v - 1);
    return std::abs(mu - eta);
}

// --- aggregators ------------------------------------------------------------

double aggregate_logits_addition(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    auto t = static_cast<double>(scores.size());
    return kSqrt6OverPi * std::sqrt(t) * (sum / t - kEulerGamma);
}

double aggregate_exponential(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    auto t = static_cast<double>(scores.size());
    return sum / std::sqrt(t) - std::sqrt(t);
}

double aggregate_kgw(std::span<const double> scores, double gamma) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    auto t = static_cast<double>(scores.size());
    return (sum - gamma * t) / std::sqrt(t * gamma * (1.0 - gamma));
}

double aggregate_dipmark(std::span<const double> scores, double gamma) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    auto t = static_cast<double>(scores.size());
    return (sum - (1.0 - gamma) * t) / std::sqrt(t);
}

double aggregate_its(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
    double sum = 0.0;
    for (double s : scores) sum += s;
    return -sum / static_cast<double>(scores.size());
}

// --- generation ---------------------------------------------------------------

namespace {

// Shared by generate_completion: given the key stream of one position, decode
// the next token under cfg. `shift_r` already chosen for the whole response.
TokenId decode_position(const SchemeConfig& cfg, const std::vector<double>& l,
                        std::uint64_t seed, std::size_t v, std::size_t shift_r,
                        SessionRng& session) {
    KeyStream stream{seed};
    if (cfg.kind == SchemeKind::kgw) {
        auto mask = green_mask(stream, v, cfg.kgw_gamma);
        return decode_kgw(l, mask, cfg.kgw_delta, session.next_unit());
    }
    if (cfg.kind == SchemeKind::dipmark) {
        auto perm = permutation(stream, v);
        return decode_dipmark(softmax(l), perm, cfg.dipmark_alpha, session.next_unit());
    }
    // GM family: drop bypass first, then key-driven decode
    if (cfg.variant == VariantKind::drop && session.next_unit() < cfg.drop_p)
        return static_cast<TokenId>(categorical_sample(softmax(l), session.next_unit()));

    if (cfg.kind == SchemeKind::logits_addition) {
        auto xi = gumbel_vector(stream, v);
        if (cfg.variant == VariantKind::shift && shift_r > 0) xi = cyclic_shift_key(xi, shift_r);
        if (cfg.variant == VariantKind::softmax_temp)
            return decode_gumbelsoft(l, xi, cfg.tau, session.next_unit());
        return decode_logits_addition(l, xi);
    }
    // exponential
    auto xi = uniform_vector(stream, v);
    if (cfg.variant == VariantKind::shift && shift_r > 0) xi = cyclic_shift_key(xi, shift_r);
    auto p = softmax(l);
    if (cfg.variant == VariantKind::softmax_temp)
        return decode_exp_softmax(p, xi, cfg.tau, session.next_unit());
    return decode_exponential(p, xi);
}

}  // namespace

TokenSequence generate_completion(const NgramModel& lm, const SchemeConfig& cfg,
                                  std::span<const TokenId> prompt, std::size_t length,
                                  SessionRng& session) {
    std::size_t v = lm.vocab_size();
    cfg.validate(v);
    if (length == 0) throw std::invalid_argument("generate_completion: length must be >= 1");

    std::size_t shift_r = 0;
    if (cfg.variant == VariantKind::shift && cfg.shift_max > 0)
        shift_r = session.next_below(static_cast<std::size_t>(cfg.shift_max) + 1);

    ContextWindow window{cfg.h, cfg.pad_token};
    TokenSequence all(prompt.begin(), prompt.end());
    TokenSequence completion;
    completion.reserve(length);
    GlobalKeyList its_list{cfg.its_master_seed, cfg.its_n_keys};

    for (std::size_t t = 0; t < length; ++t) {
        auto l = lm.logits(all);
        TokenId w;
        if (cfg.kind == SchemeKind::its) {
            auto key = its_list.entry(t, v);  // indexed by completion position
            w = decode_its(softmax(l), key.mu, key.pi);
        } else {
            auto ctx = window.at(all, all.size());
            w = decode_position(cfg, l, derive_seed(cfg.sk, ctx), v, shift_r, session);
        }
        all.push_back(w);
        completion.push_back(w);
    }
    return completion;
}

TokenSequence sample_plain(const NgramModel& lm, std::span<const TokenId> prompt,
                           std::size_t length, SessionRng& session) {
    TokenSequence all(prompt.begin(), prompt.end());
    TokenSequence completion;
    completion.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
        auto p = softmax(lm.logits(all));
        auto w = static_cast<TokenId>(categorical_sample(p, session.next_unit()));
        all.push_back(w);
        completion.push_back(w);
    }
    return completion;
}

// --- detection ----------------------------------------------------------------

DetectionReport detect(std::span<const TokenId> tokens, std::span<const TokenId> preceding,
                       const SchemeConfig& cfg, double epsilon, std::size_t vocab_size) {
    cfg.validate(vocab_size);
    if (tokens.empty()) throw std::invalid_argument("detect: empty text");
    for (TokenId w : tokens)
        if (w < 0 || static_cast<std::size_t>(w) >= vocab_size)
            throw std::invalid_argument("detect: token outside vocabulary");

    std::size_t t_count = tokens.size();
    TokenSequence all(preceding.begin(), preceding.end());
    all.insert(all.end(), tokens.begin(), tokens.end());
    ContextWindow window{cfg.h, cfg.pad_token};

    DetectionReport report;
    report.threshold = epsilon;
    report.token_count = t_count;

    if (cfg.kind == SchemeKind::its) {
        GlobalKeyList list{cfg.its_master_seed, cfg.its_n_keys};
        report.scores.reserve(t_count);
        for (std::size_t t = 0; t < t_count; ++t) {
            auto key = list.entry(t, vocab_size);
            report.scores.push_back(score_its(key.mu, key.pi, tokens[t]));
        }
        report.statistic = aggregate_its(report.scores);
        report.decision = report.statistic >= epsilon;
        return report;
    }

    // per-position stream seeds shared by all shift hypotheses
    std::vector<std::uint64_t> seeds(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        auto ctx = window.at(all, preceding.size() + t);
        seeds[t] = derive_seed(cfg.sk, ctx);
    }

    switch (cfg.kind) {
        case SchemeKind::kgw: {
            report.scores.reserve(t_count);
            for (std::size_t t = 0; t < t_count; ++t) {
                auto mask = green_mask(KeyStream{seeds[t]}, vocab_size, cfg.kgw_gamma);
                report.scores.push_back(score_kgw(mask, tokens[t]));
            }
            report.statistic = aggregate_kgw(report.scores, cfg.kgw_gamma);
            break;
        }
        case SchemeKind::dipmark: {
            report.scores.reserve(t_count);
            for (std::size_t t = 0; t < t_count; ++t) {
                auto perm = permutation(KeyStream{seeds[t]}, vocab_size);
                report.scores.push_back(score_dipmark(perm, tokens[t], cfg.dipmark_gamma));
            }
            report.statistic = aggregate_dipmark(report.scores, cfg.dipmark_gamma);
            break;
        }
        case SchemeKind::logits_addition:
        case SchemeKind::exponential: {
            bool gumbel_form = cfg.kind == SchemeKind::logits_addition;
            std::size_t n_shifts =
                cfg.variant == VariantKind::shift ? static_cast<std::size_t>(cfg.shift_max) + 1 : 1;
            double best_stat = -std::numeric_limits<double>::infinity();
            std::size_t best_r = 0;
            std::vector<double> scores(t_count);
            for (std::size_t r = 0; r < n_shifts; ++r) {
                for (std::size_t t = 0; t < t_count; ++t) {
                    // entry w of the r-rotated key vector is stream entry (w+r) mod |V|
                    auto idx = (static_cast<std::size_t>(tokens[t]) + r) % vocab_size;
                    KeyStream stream{seeds[t]};
                    scores[t] = gumbel_form ? stream.gumbel_at(idx)
                                            : -std::log(1.0 - stream.uniform_at(idx));
                }
                double stat = gumbel_form ? aggregate_logits_addition(scores)
                                          : aggregate_exponential(scores);
                if (stat > best_stat) {
                    best_stat = stat;
                    best_r = r;
                    report.scores = scores;
                }
            }
            report.statistic = best_stat;
            if (cfg.variant == VariantKind::shift) report.best_shift = static_cast<int>(best_r);
            break;
        }
        case SchemeKind::its:
            break;  // handled above
    }

    report.decision = report.statistic >= epsilon;
    return report;
}

}  // namespace wm
