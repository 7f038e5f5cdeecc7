#include "doctest.h"

#include "msa/distributions.hpp"
#include "msa/error.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

using namespace msa;

namespace {

double relative_error(double got, double want) {
    if (want == 0.0) return std::abs(got);
    return std::abs(got - want) / std::abs(want);
}

}  // namespace

TEST_CASE("regularized incomplete gamma against boost") {
    const double shapes[] = {0.5, 1.0, 1.5, 2.0, 3.5, 7.0, 12.5, 30.0, 80.0};
    const double points[] = {1e-6, 0.01, 0.3, 1.0, 2.5, 5.0, 10.0, 25.0, 60.0, 120.0};
    for (double a : shapes) {
        for (double x : points) {
            const double p = boost::math::gamma_p(a, x);
            const double q = boost::math::gamma_q(a, x);
            if (p > 1e-280) CHECK(relative_error(regularized_gamma_p(a, x), p) < 1e-10);
            if (q > 1e-280) CHECK(relative_error(regularized_gamma_q(a, x), q) < 1e-10);
        }
    }
    CHECK(regularized_gamma_p(2.0, 0.0) == 0.0);
    CHECK(regularized_gamma_q(2.0, 0.0) == 1.0);
    CHECK_THROWS_AS(regularized_gamma_p(0.0, 1.0), Error);
    CHECK_THROWS_AS(regularized_gamma_q(1.0, -1.0), Error);
}

TEST_CASE("chi-square upper tail") {
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi_square_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-10));
    // df = 2 has the closed form exp(-x/2).
    for (double x : {0.1, 1.0, 7.2, 30.0, 100.0}) {
        CHECK(relative_error(chi_square_sf(x, 2), std::exp(-x / 2)) < 1e-12);
    }
    CHECK(chi_square_sf(0.0, 3) == 1.0);
    CHECK_THROWS_AS(chi_square_sf(1.0, 0.0), Error);
}

TEST_CASE("two-sided normal p") {
    CHECK(two_sided_normal_p(0.0) == 1.0);
    CHECK(two_sided_normal_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
    for (double z : {0.3, 1.0, 2.5, 6.0, -3.0}) {
        CHECK(relative_error(two_sided_normal_p(z), boost::math::erfc(std::abs(z) / std::sqrt(2.0))) < 1e-13);
    }
}

TEST_CASE("binomial half upper tail is exact") {
    for (int trials : {1, 2, 10, 25, 60, 200}) {
        for (int s = 0; s <= trials; s += std::max(1, trials / 7)) {
            // P(X >= s) = sum_{x >= s} C(trials, x) / 2^trials
            msa::testing::BigInt tail = 0;
            for (int x = s; x <= trials; ++x) tail += msa::testing::binomial(trials, x);
            const msa::testing::BigInt scaled = (tail << 200) >> trials;
            const double want = std::ldexp(scaled.convert_to<double>(), -200);
            CHECK(relative_error(binomial_half_upper_tail(s, trials), want) < 1e-12);
        }
    }
    CHECK(binomial_half_upper_tail(0, 0) == 1.0);
    CHECK(binomial_half_upper_tail(11, 10) == 0.0);
}
