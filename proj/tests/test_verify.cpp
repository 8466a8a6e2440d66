#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "wm/verify.hpp"

using namespace wm;
using namespace wm::verify;

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

TEST_CASE("trigamma special values") {
    CHECK(std::abs(trigamma(1.0) - std::numbers::pi * std::numbers::pi / 6.0) < 1e-10);
    CHECK(std::abs(trigamma(0.5) - std::numbers::pi * std::numbers::pi / 2.0) < 1e-10);
    CHECK(std::abs(trigamma(2.0) - (std::numbers::pi * std::numbers::pi / 6.0 - 1.0)) < 1e-10);
    // recurrence psi_1(x) = psi_1(x+1) + 1/x^2 across scales
    for (double x : {0.1, 0.7, 1.3, 3.14, 12.5, 80.0})
        CHECK(std::abs(trigamma(x) - (trigamma(x + 1.0) + 1.0 / (x * x))) < 1e-10);
}

TEST_CASE("unbiasedness checks pass and are seed-stable") {
    std::vector<double> l{1.0, 0.0, -1.0, 0.5};
    auto a = check_gumbelmax_unbiased(l, 200000, 7);
    CHECK(a.passed);
    CHECK(a.samples == 200000);
    auto a2 = check_gumbelmax_unbiased(l, 200000, 7);
    CHECK(a.observed == a2.observed);

    CHECK(check_exponential_unbiased(l, 200000, 7).passed);
    CHECK(check_dipmark_unbiased(l, 0.45, 200000, 7).passed);
    CHECK(check_its_unbiased(l, 200000, 7).passed);
}

TEST_CASE("equivalence check finds zero argmax mismatches") {
    auto r = check_equivalence(50000, 11);
    CHECK(r.passed);
    REQUIRE(r.observed.size() >= 2);
    CHECK(r.observed[0] == 0.0);  // argmax mismatches
    CHECK(r.observed[1] == 0.0);  // scorer-value collisions
}

TEST_CASE("theorem1 moment checks") {
    CHECK(check_theorem1_null(300000, 5).passed);
    for (double p : {0.1, 0.5, 0.9}) {
        auto r = check_theorem1(p, 150000, 5);
        CHECK(r.passed);
        // conditional mean matches -log p + gamma
        CHECK(std::abs(r.observed[0] - (-std::log(p) + kEulerGamma)) < 0.03);
    }
}

TEST_CASE("exponential moment checks") {
    CHECK(check_exponential_null(300000, 5).passed);
    auto r = check_exponential_moments(0.5, 150000, 5);
    CHECK(r.passed);
    // variance target psi_1(1) - psi_1(1 + 1/p) = psi_1(1) - psi_1(3)
    double expect_var = trigamma(1.0) - trigamma(3.0);
    CHECK(std::abs(r.observed[1] - expect_var) < 0.05);
}

TEST_CASE("aggregator null calibration") {
    auto r = check_aggregator_null(test_model(), SchemeKind::logits_addition, 800, 100, 19);
    CHECK(r.passed);
    CHECK(std::abs(r.observed[0]) < 0.15);  // null mean near 0
    CHECK(check_aggregator_null(test_model(), SchemeKind::its, 800, 100, 19).passed);
}

TEST_CASE("run_suite filter and reproducibility") {
    auto subset = run_suite(test_model(), "trivially-nonmatching-filter", 10000, 3);
    CHECK(subset.empty());

    auto t1 = run_suite(test_model(), "theorem1", 50000, 3);
    REQUIRE(t1.size() == 5);  // null + four conditional p_w values
    for (const auto& r : t1) CHECK(r.passed);
    auto t1_again = run_suite(test_model(), "theorem1", 50000, 3);
    CHECK(t1[0].observed == t1_again[0].observed);
    CHECK(t1[0].to_json() == t1_again[0].to_json());

    auto ub = run_suite(test_model(), "unbiased", 50000, 3);
    CHECK(ub.size() >= 4);
    for (const auto& r : ub) CHECK(r.passed);
}
