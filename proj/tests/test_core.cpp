#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wm/core.hpp"
#include "wm/keyrand.hpp"

using namespace wm;

TEST_CASE("softmax basics") {
    std::vector<double> flat{0.0, 0.0};
    auto p = softmax(flat);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<double> logs{std::log(1.0), std::log(2.0), std::log(3.0)};
    auto q = softmax(logs);
    CHECK(q[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
    CHECK(q[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));
}

TEST_CASE("softmax with temperature matches high-precision reference") {
    // exp([4,2,1]) renormalized, evaluated with 50-digit arithmetic
    std::vector<double> l{2.0, 1.0, 0.5};
    auto p = softmax(l, 0.5);
    CHECK(p[0] == doctest::Approx(0.8437947344813395).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.11419519938459448).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(0.04201006613406605).epsilon(1e-14));
}

TEST_CASE("softmax rejects bad input") {
    std::vector<double> l{0.0, 1.0};
    CHECK_THROWS_AS(softmax(l, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax(l, -1.0), std::invalid_argument);
    std::vector<double> bad{0.0, std::nan("")};
    CHECK_THROWS_AS(softmax(bad), std::invalid_argument);
}

TEST_CASE("softmax shift invariance") {
    KeyStream stream{123};
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> l(7), shifted(7);
        double c = 40.0 * (stream.uniform_at(rep * 100) - 0.5);
        for (int i = 0; i < 7; ++i) {
            l[i] = 10.0 * (stream.uniform_at(rep * 100 + i + 1) - 0.5);
            shifted[i] = l[i] + c;
        }
        auto a = softmax(l, 0.7);
        auto b = softmax(shifted, 0.7);
        for (int i = 0; i < 7; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("softmax sums to one") {
    auto p = softmax(std::vector<double>{-3.0, 800.0, 0.2, -750.0});
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("argmax_with_tiebreak") {
    CHECK(argmax_with_tiebreak(std::vector<double>{1, 3, 3}) == 1);
    CHECK(argmax_with_tiebreak(std::vector<double>{5}) == 0);
    CHECK(argmax_with_tiebreak(std::vector<double>{-1, -1, -1}) == 0);
    CHECK_THROWS_AS(argmax_with_tiebreak(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("argmax permutation covariance on distinct values") {
    std::vector<double> v{0.3, -2.0, 4.5, 1.1, 0.0};
    std::vector<std::size_t> sigma{4, 2, 0, 1, 3};  // permuted[i] = v[sigma[i]]
    std::vector<double> permuted(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) permuted[i] = v[sigma[i]];
    auto orig = argmax_with_tiebreak(v);
    auto perm = argmax_with_tiebreak(permuted);
    CHECK(sigma[perm] == orig);
}

TEST_CASE("categorical_sample") {
    std::vector<double> p{0.2, 0.8};
    CHECK(categorical_sample(p, 0.1) == 0);
    CHECK(categorical_sample(p, 0.9) == 1);
    std::vector<double> thirds{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(categorical_sample(thirds, 0.34) == 1);

    CHECK_THROWS_AS(categorical_sample(std::vector<double>{0.5, 0.2}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(categorical_sample(std::vector<double>{-0.1, 1.1}, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(categorical_sample(p, 1.0), std::invalid_argument);
}

TEST_CASE("categorical_sample reproduces the target law") {
    // 10-entry distribution, 1e6 stream draws, TV below 0.005
    std::vector<double> weights{5, 1, 9, 2, 7, 3, 8, 4, 6, 5};
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> p(weights.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = weights[i] / total;
    KeyStream stream{987654321};
    std::vector<double> freq(p.size(), 0.0);
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) ++freq[categorical_sample(p, stream.uniform_at(i))];
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(freq[i] / n - p[i]);
    CHECK(0.5 * tv < 0.005);
}

TEST_CASE("vocabulary jsonl round trip") {
    Vocabulary v;
    v.add("alpha");
    v.add("beta");
    v.add("gamma");
    auto text = v.to_jsonl();
    auto back = Vocabulary::from_jsonl(text);
    CHECK(back.size() == 3);
    CHECK(back.id_of("beta") == 1);
    CHECK(back.surface_of(2) == "gamma");
    CHECK(back.to_jsonl() == text);
}
