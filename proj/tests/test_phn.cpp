#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phnturbo/phn.hpp"

using namespace phnturbo;

namespace {
const PhnParams kPaper{deg2rad(3.0), 1e5, 5e-8};  // 3 deg, 100 kHz, 20 MHz
}

TEST_CASE("correlation constant of the paper setup") {
    CHECK(kPaper.correlation() == doctest::Approx(0.969072).epsilon(1e-5));
}

TEST_CASE("covariance: single sample and closed-form entries") {
    const PhnCovariance one = phn_covariance(kPaper, 1);
    CHECK(one.matrix.rows() == 1);
    CHECK(one.matrix(0, 0) ==
          doctest::Approx(kPaper.sigma_theta * kPaper.sigma_theta));

    const PhnCovariance cov = phn_covariance(kPaper, 8);
    const double p = kPaper.correlation();
    const double s2 = kPaper.sigma_theta * kPaper.sigma_theta;
    CHECK(cov.matrix(0, 2) == doctest::Approx(s2 * p * p).epsilon(1e-12));
    CHECK(cov.matrix(5, 1) == doctest::Approx(s2 * std::pow(p, 4)).epsilon(1e-12));
}

TEST_CASE("covariance: zero sigma gives the zero matrix") {
    PhnParams z = kPaper;
    z.sigma_theta = 0.0;
    CHECK(phn_covariance(z, 5).matrix.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariance: invalid parameters throw") {
    CHECK_THROWS_AS(phn_covariance({0.05, 0.0, 5e-8}, 4), std::invalid_argument);
    CHECK_THROWS_AS(phn_covariance({0.05, 1e5, -1.0}, 4), std::invalid_argument);
    CHECK_THROWS_AS(phn_covariance(kPaper, 0), std::invalid_argument);
}

TEST_CASE("covariance is symmetric Toeplitz positive definite up to n=256") {
    for (int n : {2, 17, 64, 256}) {
        const Mat m = phn_covariance(kPaper, n).matrix;
        CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (int i = 0; i + 1 < n; ++i)
            for (int j = 0; j + 1 < n; ++j) CHECK(m(i, j) == m(i + 1, j + 1));
        Eigen::LLT<Mat> llt(m);
        CHECK(llt.info() == Eigen::Success);
    }
}

TEST_CASE("sample_phn: determinism and degenerate sigma") {
    Rng a(42), b(42);
    const Vec s1 = sample_phn(kPaper, 32, a).theta;
    const Vec s2 = sample_phn(kPaper, 32, b).theta;
    CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);

    PhnParams z = kPaper;
    z.sigma_theta = 0.0;
    Rng c(7);
    CHECK(sample_phn(z, 16, c).theta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_phn: empirical covariance matches phn_covariance") {
    const int n = 16;
    const int draws = 100000;
    const Mat phi = phn_covariance(kPaper, n).matrix;

    Rng rng(2024);
    Mat acc = Mat::Zero(n, n);
    for (int d = 0; d < draws; ++d) {
        const Vec th = sample_phn(kPaper, n, rng).theta;
        acc += th * th.transpose();
    }
    acc /= draws;

    // entrywise within 3 standard errors; se ~ sqrt((phi_ii phi_jj + phi_ij^2)/M)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double se = std::sqrt(
                (phi(i, i) * phi(j, j) + phi(i, j) * phi(i, j)) / draws);
            CHECK(std::abs(acc(i, j) - phi(i, j)) < 3.5 * se);
        }

    // lag-1 correlation within 1%
    double num = 0, den = 0;
    for (int i = 0; i + 1 < n; ++i) {
        num += acc(i, i + 1);
        den += 0.5 * (acc(i, i) + acc(i + 1, i + 1));
    }
    CHECK(num / den == doctest::Approx(kPaper.correlation()).epsilon(0.01));
}

TEST_CASE("cpe_variance: closed form, limits and brute-force identity") {
    CHECK(cpe_variance(kPaper, 1) ==
          doctest::Approx(kPaper.sigma_theta * kPaper.sigma_theta));

    // p -> 0: i.i.d. samples, variance sigma^2 / n
    PhnParams fast = kPaper;
    fast.omega_3db = 1e12;
    CHECK(cpe_variance(fast, 10) ==
          doctest::Approx(fast.sigma_theta * fast.sigma_theta / 10.0).epsilon(1e-6));

    for (int n : {3, 17, 64}) {
        const Mat phi = phn_covariance(kPaper, n).matrix;
        double brute = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) brute += phi(i, j);
        brute /= double(n) * n;
        CHECK(cpe_variance(kPaper, n) == doctest::Approx(brute).epsilon(1e-14));
    }
}

TEST_CASE("cpe_variance decreases monotonically in n") {
    double prev = cpe_variance(kPaper, 1);
    for (int n = 2; n <= 128; ++n) {
        const double v = cpe_variance(kPaper, n);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("cpe_variance: paper setup vs Monte Carlo within 2%") {
    const int n = 64;
    const double v = cpe_variance(kPaper, n);
    Rng rng(99);
    double acc = 0;
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
        const Vec th = sample_phn(kPaper, n, rng).theta;
        const double m = th.mean();
        acc += m * m;
    }
    acc /= draws;
    CHECK(acc == doctest::Approx(v).epsilon(0.02));
}

TEST_CASE("cpe_tail_probability: trivial and derived points") {
    CHECK(cpe_tail_probability(kPaper, 64, 0.0) == doctest::Approx(0.5));

    // paper setup at 9 degrees: ~4e-5, accepted within a factor of 2
    const double tail = cpe_tail_probability(kPaper, 64, deg2rad(9.0));
    CHECK(tail > 2e-5);
    CHECK(tail < 8e-5);

    // 10-sigma normal tail at n = 1
    const double t10 = cpe_tail_probability(kPaper, 1, 10.0 * kPaper.sigma_theta);
    CHECK(t10 == doctest::Approx(7.62e-24).epsilon(0.01));

    // two-sided doubles the one-sided value
    CHECK(cpe_tail_probability(kPaper, 64, deg2rad(9.0), true) ==
          doctest::Approx(2.0 * tail));

    PhnParams z = kPaper;
    z.sigma_theta = 0.0;
    CHECK(cpe_tail_probability(z, 64, deg2rad(1.0)) == 0.0);
}
