#include <cmath>
#include <vector>

#include "doctest.h"
#include "tide/numeric.hpp"

using namespace tide;
using numeric::Pcg32;

TEST_CASE("logsumexp matches direct evaluation") {
    std::vector<double> two_zeros = {0.0, 0.0};
    CHECK(numeric::logsumexp(two_zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // log(e^0 + e^{ln 3}) = log 4
    std::vector<double> v = {0.0, std::log(3.0)};
    CHECK(numeric::logsumexp(v) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("logsumexp shifts away from overflow") {
    std::vector<double> v = {1000.0, 1000.0};
    double r = numeric::logsumexp(v);
    CHECK(std::isfinite(r));
    CHECK(r == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));

    std::vector<double> extreme = {1e6, -1e6, 999999.0};
    CHECK(std::isfinite(numeric::logsumexp(extreme)));
}

TEST_CASE("logsumexp rejects bad input") {
    CHECK_THROWS_AS(numeric::logsumexp({}), std::invalid_argument);
    std::vector<double> nan = {0.0, std::nan("")};
    CHECK_THROWS_AS(numeric::logsumexp(nan), NumericError);
}

TEST_CASE("softmax_row basics") {
    std::vector<double> zeros = {0.0, 0.0, 0.0, 0.0};
    auto p = numeric::softmax_row(zeros, 1.0);
    for (double v : p) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    }

    std::vector<double> v = {0.0, std::log(3.0)};
    auto q = numeric::softmax_row(v, 1.0);
    CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_row shift invariance and normalization") {
    Pcg32 gen(11);
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t n = 1 + gen.next_u32() % 300;
        std::vector<double> logits(n);
        for (double& x : logits) {
            x = 10.0 * gen.next_gaussian();
        }
        double c = 100.0 * gen.next_gaussian();
        std::vector<double> shifted(n);
        for (std::size_t i = 0; i < n; ++i) {
            shifted[i] = logits[i] + c;
        }
        auto a = numeric::softmax_row(logits, 0.7);
        auto b = numeric::softmax_row(shifted, 0.7);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
            sum += a[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax_row stays normalized at a million entries") {
    Pcg32 gen(13);
    std::vector<double> logits(1000000);
    for (double& x : logits) {
        x = 3.0 * gen.next_gaussian();
    }
    auto p = numeric::softmax_row(logits, 0.5);
    double sum = 0.0;
    for (double v : p) {
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("softmax_row applies column bias before scaling") {
    std::vector<double> logits = {0.0, 0.0};
    std::vector<double> bias = {std::log(3.0), 0.0};
    auto p = numeric::softmax_row(logits, 1.0, bias);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax_row rejects bad input") {
    std::vector<double> v = {0.0, 1.0};
    CHECK_THROWS_AS(numeric::softmax_row(v, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(numeric::softmax_row(v, -1.0), std::invalid_argument);
    std::vector<double> inf = {0.0, INFINITY};
    CHECK_THROWS_AS(numeric::softmax_row(inf, 1.0), NumericError);
    std::vector<double> bias = {0.0};
    CHECK_THROWS_AS(numeric::softmax_row(v, 1.0, bias), std::invalid_argument);
}

TEST_CASE("gaussian_vector determinism and moments") {
    auto zeros = numeric::gaussian_vector(5, 0.0, 123);
    for (double v : zeros) {
        CHECK(v == 0.0);
    }

    auto a = numeric::gaussian_vector(1000, 1.5, 7);
    auto b = numeric::gaussian_vector(1000, 1.5, 7);
    CHECK(a == b);  // bit-identical

    auto big = numeric::gaussian_vector(100000, 1.0, 7);
    double var = numeric::variance(big);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("pcg32 streams are independent and reproducible") {
    Pcg32 a(42, 0);
    Pcg32 b(42, 0);
    Pcg32 c(42, 1);
    bool same = true;
    bool differ = false;
    for (int i = 0; i < 64; ++i) {
        std::uint32_t x = a.next_u32();
        same = same && (x == b.next_u32());
        differ = differ || (x != c.next_u32());
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("matmul agrees with naive triple loop") {
    Pcg32 gen(3);
    numeric::RowMatrix a(5, 7);
    numeric::RowMatrix b(7, 4);
    for (double& v : a.data) {
        v = gen.next_gaussian();
    }
    for (double& v : b.data) {
        v = gen.next_gaussian();
    }
    auto c = numeric::matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 7; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            CHECK(c.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    auto d = numeric::matmul_nt(a, a);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 7; ++k) {
                acc += a.at(i, k) * a.at(j, k);
            }
            CHECK(d.at(i, j) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(numeric::matmul(a, a), std::invalid_argument);
}
