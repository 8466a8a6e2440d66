#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "wm/eval.hpp"

using namespace wm;
using namespace wm::eval;

namespace {

const NgramModel& test_model() {
    static NgramModel m = [] {
        std::ifstream in(std::string(WM_DATA_DIR) + "/corpus.txt");
        REQUIRE(in.good());
        std::ostringstream buf;
        buf << in.rdbuf();
        return NgramModel::train(buf.str(), 3, 0.1, 4.0);
    }();
    return m;
}

}  // namespace

TEST_CASE("auroc exact values") {
    CHECK(auroc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == doctest::Approx(1.0));
    CHECK(auroc(std::vector<double>{0, 1}, std::vector<double>{2, 3}) == doctest::Approx(0.0));
    CHECK(auroc(std::vector<double>{1, 3}, std::vector<double>{2, 0}) == doctest::Approx(0.75));
    std::vector<double> same{0.5, 0.5, 0.5};
    CHECK(auroc(same, same) == doctest::Approx(0.5));  // all ties -> chance
    CHECK_THROWS_AS(auroc(std::vector<double>{}, same), std::invalid_argument);
}

TEST_CASE("auroc on shifted gaussians approaches closed form") {
    // AUROC of N(d,1) vs N(0,1) is Phi(d/sqrt(2))
    KeyStream stream{31415};
    std::uint64_t ctr = 0;
    auto normal = [&](double shift) {
        double u1 = stream.uniform_at(ctr++), u2 = stream.uniform_at(ctr++);
        return shift + std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    };
    std::vector<double> pos(20000), neg(20000);
    for (auto& x : pos) x = normal(1.0);
    for (auto& x : neg) x = normal(0.0);
    double target = 0.5 * std::erfc(-1.0 / 2.0);  // Phi(1/sqrt(2))
    CHECK(std::abs(auroc(pos, neg) - target) < 0.01);
}

TEST_CASE("fnr_at_fpr and fpr_at_fnr") {
    std::vector<double> pos{5, 6, 7, 8};
    std::vector<double> neg{0, 1, 2, 3};
    CHECK(fnr_at_fpr(pos, neg, 0.01) == doctest::Approx(0.0));  // separable
    CHECK(fpr_at_fnr(pos, neg, 0.01) == doctest::Approx(0.0));

    // fully interleaved scores: suppressing FPR to 0 costs most positives
    std::vector<double> p2{1, 3, 5, 7};
    std::vector<double> n2{2, 4, 6, 8};
    CHECK(fnr_at_fpr(p2, n2, 0.01) == doctest::Approx(1.0));

    // 10% of negatives above the usable threshold
    std::vector<double> neg10(100);
    for (int i = 0; i < 100; ++i) neg10[i] = i;  // 0..99
    std::vector<double> pos10(100, 89.5);        // above 90 negatives
    CHECK(fnr_at_fpr(pos10, neg10, 0.10) == doctest::Approx(0.0));
    CHECK(fnr_at_fpr(pos10, neg10, 0.05) == doctest::Approx(1.0));
}

TEST_CASE("bleu golden value") {
    // candidate [a,b,c,d] vs single reference [a,b,x,y], max_n=2:
    // p1=2/4, p2=1/3, BP=1 -> sqrt(0.5/3)
    TokenSequence cand{0, 1, 2, 3};
    std::vector<TokenSequence> refs{{0, 1, 4, 5}};
    CHECK(bleu(cand, refs, 2) == doctest::Approx(0.408248290463863).epsilon(1e-12));
    // identical candidate and reference -> 1
    CHECK(bleu(refs[0], refs, 4) == doctest::Approx(1.0));
    // disjoint -> 0
    TokenSequence other{7, 8, 9, 10};
    CHECK(bleu(other, refs, 2) == doctest::Approx(0.0));
}

TEST_CASE("self_bleu extremes") {
    std::vector<TokenSequence> identical(5, TokenSequence{1, 2, 3, 4, 5, 6});
    CHECK(self_bleu(identical, 4) == doctest::Approx(1.0));

    std::vector<TokenSequence> disjoint{{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}};
    CHECK(self_bleu(disjoint, 2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(self_bleu(std::vector<TokenSequence>{{1, 2}}, 2), std::invalid_argument);
}

TEST_CASE("distinct_n") {
    std::vector<TokenSequence> texts{{0, 1, 0, 1}};
    CHECK(distinct_n(texts, 1) == doctest::Approx(0.5));  // {0,1} / 4 tokens
    CHECK(distinct_n(texts, 2) == doctest::Approx(2.0 / 3.0));
    std::vector<TokenSequence> uniq{{0, 1, 2, 3}};
    CHECK(distinct_n(uniq, 1) == doctest::Approx(1.0));
}

TEST_CASE("substitution attack") {
    auto& lm = test_model();
    TokenSequence text(200, 5);
    SessionRng rng(77);
    CHECK(substitution_attack(text, 0.0, lm, rng) == text);
    auto attacked = substitution_attack(text, 0.3, lm, rng);
    REQUIRE(attacked.size() == text.size());
    int changed = 0;
    for (std::size_t i = 0; i < text.size(); ++i) changed += attacked[i] != text[i];
    // ~Binomial(200, <=0.3); replacement may coincide with the original token
    CHECK(changed > 30);
    CHECK(changed < 90);
}

TEST_CASE("experiment spec json round trip") {
    ExperimentSpec spec;
    SchemeSpec s;
    s.id = "gsoft";
    s.config.kind = SchemeKind::logits_addition;
    s.config.variant = VariantKind::softmax_temp;
    s.config.tau = 0.3;
    s.config.sk = 1234;
    spec.schemes.push_back(s);
    spec.prompts = {"the first law", "a second prompt"};
    spec.repeats = 3;
    spec.length = 50;
    spec.detection_lengths = {20, 50};
    spec.substitution_rho = 0.2;
    spec.seed = 99;
    auto back = ExperimentSpec::from_json(spec.to_json());
    CHECK(back.schemes.size() == 1);
    CHECK(back.schemes[0].id == "gsoft");
    CHECK(back.schemes[0].config.tau == doctest::Approx(0.3));
    CHECK(back.prompts == spec.prompts);
    CHECK(back.detection_lengths == spec.detection_lengths);
    REQUIRE(back.substitution_rho.has_value());
    CHECK(*back.substitution_rho == doctest::Approx(0.2));
    CHECK(back.seed == 99);
}

TEST_CASE("run_experiment determinism and thread independence") {
    auto& lm = test_model();
    ExperimentSpec spec;
    for (auto [id, kind] : std::initializer_list<std::pair<const char*, SchemeKind>>{
             {"la", SchemeKind::logits_addition}, {"kgw", SchemeKind::kgw}}) {
        SchemeSpec s;
        s.id = id;
        s.config.kind = kind;
        s.config.sk = 2024;
        s.config.pad_token = lm.pad_token();
        spec.schemes.push_back(s);
    }
    spec.prompts = {"the quick", "every model"};
    spec.repeats = 4;
    spec.length = 60;
    spec.detection_lengths = {30, 60};
    spec.seed = 555;

    auto r1 = run_experiment(spec, lm);
    spec.threads = 4;
    auto r2 = run_experiment(spec, lm);
    CHECK(metrics_csv(r1.rows) == metrics_csv(r2.rows));
    CHECK(scores_jsonl(r1.scores) == scores_jsonl(r2.scores));

    REQUIRE(r1.rows.size() == 4);  // 2 schemes x 2 detection lengths
    for (const auto& row : r1.rows) {
        CHECK(row.auroc > 0.9);  // high-entropy model separates easily
        CHECK(row.self_bleu >= 0.0);
        CHECK(row.self_bleu <= 1.0);
        CHECK(row.distinct1 > 0.0);
        CHECK(row.perplexity > 1.0);
    }
    // scores: schemes x prompts x repeats x lengths x {wm, null}
    CHECK(r1.scores.size() == 2 * 2 * 4 * 2 * 2);
}

TEST_CASE("metrics csv shape") {
    MetricsRow row;
    row.scheme_id = "x";
    row.detection_length = 40;
    row.auroc = 0.5;
    auto csv = metrics_csv({row});
    CHECK(csv.find("scheme_id") != std::string::npos);
    CHECK(csv.find("\nx,40,") != std::string::npos);
}
