#include <gtest/gtest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "fixtures.hpp"

using namespace opweigh;

namespace {

const GaugeReference kR0(1.0);

std::vector<std::pair<double, double>> samples_of(const std::vector<double>& coeffs, const std::vector<double>& eps) {
    std::vector<std::pair<double, double>> out;
    for (double e : eps) {
        double acc = 0.0;
        for (int n = static_cast<int>(coeffs.size()) - 1; n >= 0; --n) {
            acc = acc * e + coeffs[static_cast<std::size_t>(n)] / (n + 1);
        }
        out.emplace_back(e, acc * e);
    }
    return out;
}

} // namespace

TEST(Weighing, OneDimensionalWeights) {
    const CombinedFamily f = oneD_family(2, 1, 3, 1);
    const BalancePoint bp = balance(f.base(), kR0, fixtures::oned_bracket());
    const DifferentialWeight w = differential_weight(f.base(), bp);
    EXPECT_NEAR(w.bracket, 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(w.finite_difference, 2.0 / 3.0, 1e-8);

    const WeightScale ws = weight_scale(perturbation_series(f, kR0, bp, *bp.spectral, 5), 5);
    EXPECT_NEAR(ws.coeffs[0], 1.0 / 3.0, 1e-14);
    for (int n = 1; n <= 5; ++n) {
        EXPECT_NEAR(ws.coeffs[n], 0.0, 1e-14);
    }
    EXPECT_LE(ws.diagonal_discrepancy, 1e-14);
    for (double eps : {-0.5, 0.6, 1.0}) {
        EXPECT_NEAR(ws(eps), eps / 3.0, 1e-14);
        EXPECT_NEAR(ws.differential(eps), 1.0 / 3.0, 1e-14);
        EXPECT_NEAR(weighing_integral(f, kR0, fixtures::oned_bracket(), eps), -eps / 3.0, 1e-11);
    }
    EXPECT_EQ(weighing_integral(f, kR0, fixtures::oned_bracket(), 0.0), 0.0);
}

TEST(Weighing, WorkedInstanceWeightScale) {
    const fixtures::Worked2D w;
    const ShiftedFamily sf = shift_to_balance(w.family(), kR0, w.bracket);
    const SeriesBundle b = perturbation_series(sf.family, kR0, sf.bracket, 24);
    const WeightScale ws = weight_scale(b, 24);
    for (int n = 0; n <= 8; ++n) {
        EXPECT_NEAR(ws.coeffs[n], -0.5 * std::pow(0.5, n), 1e-13) << n;
    }
    for (double eps = 0.0; eps <= 0.9 + 1e-12; eps += 0.1) {
        EXPECT_NEAR(ws(eps), std::log1p(-eps / 2), 1e-9) << eps;
    }
}

TEST(Weighing, BalanceCheckOnWorkedInstance) {
    const fixtures::Worked2D w;
    const WeighingReport rep = balance_check(w.family(), kR0, w.bracket, {1.0, 0.2, 0.5}, 24);
    ASSERT_EQ(rep.samples.size(), 3u);
    EXPECT_DOUBLE_EQ(rep.samples[0].eps, 0.2);
    EXPECT_NEAR(rep.shift, -2.0, 1e-13);
    for (const auto& s : rep.samples) {
        EXPECT_NEAR(s.z, -2.0 + s.eps, 1e-12);
        EXPECT_LE(s.balance_residual, 1e-7) << s.eps;
        EXPECT_LE(s.differential_residual, 1e-5) << s.eps;
        EXPECT_NEAR(s.Z2_integral, -std::log1p(-s.eps / 2), 1e-9);
    }
}

TEST(Weighing, QuadratureBudgetExhausted) {
    const fixtures::Worked2D w;
    const ShiftedFamily sf = shift_to_balance(w.family(), kR0, w.bracket);
    try {
        weighing_integral(sf.family, kR0, sf.bracket, 0.9, {1e-17, 1});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "quadrature not converged");
    }
}

TEST(Weighing, RecoverExactPolynomial) {
    const std::vector<double> c = {-0.5, -0.25, -0.125, -0.0625};
    const auto s = samples_of(c, {-0.4, -0.1, 0.0, 0.2, 0.3, 0.5, 0.7});
    const RecoveredCoefficients r = recover_coefficients(s, 3);
    ASSERT_EQ(r.values.size(), 4u);
    for (std::size_t n = 0; n < c.size(); ++n) {
        EXPECT_NEAR(r.values[n], c[n], 1e-12);
    }
    EXPECT_FALSE(r.scaled_basis);
    EXPECT_EQ(recover_coefficients(s, 0).values.size(), 1u);
}

TEST(Weighing, RecoverSwitchesToScaledBasis) {
    const std::vector<double> c = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    std::vector<double> eps;
    for (int i = 1; i <= 10; ++i) {
        eps.push_back(1e-3 * i);
    }
    const RecoveredCoefficients r = recover_coefficients(samples_of(c, eps), 5);
    EXPECT_TRUE(r.scaled_basis);
    EXPECT_NEAR(r.values[0], 1.0, 1e-8);
    EXPECT_NEAR(r.values[1], 2.0, 1e-5);
}

TEST(Weighing, RecoverErrors) {
    const auto s = samples_of({1.0}, {0.1, 0.2});
    try {
        recover_coefficients(s, 2);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "insufficient samples");
    }
    try {
        recover_coefficients({{0.1, 1.0}, {0.1, 1.0}, {0.2, 1.0}}, 1);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "rank-deficient sample set");
    }
    EXPECT_THROW(recover_coefficients(s, -1), InputError);
}

TEST(Weighing, NoiseIsSeeded) {
    const auto s = samples_of({1.0}, {0.1, 0.2, 0.3});
    const auto a = add_uniform_noise(s, 1e-3, 9);
    const auto b = add_uniform_noise(s, 1e-3, 9);
    const auto c = add_uniform_noise(s, 1e-3, 10);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(std::abs(a[i].second - s[i].second), 1e-3);
        EXPECT_EQ(a[i].first, s[i].first);
    }
}

TEST(Weighing, RealizationError) {
    const fixtures::Worked2D w;
    const CombinedFamily ideal = w.family();
    const auto same = realization_error(ideal, kR0, ideal.with_gauge_factor(2.0), GaugeReference(2.0), w.bracket,
                                        {0.2, 0.5});
    for (const auto& p : same) {
        EXPECT_NEAR(p.discrepancy(), 0.0, 1e-12);
        EXPECT_NEAR(p.z_discrepancy(), 0.0, 1e-12);
    }
    fixtures::Worked2D off = w;
    off.C(1, 1) = 1.01;
    const auto diff = realization_error(ideal, kR0, off.family(), kR0, w.bracket, {0.5});
    EXPECT_GT(std::abs(diff.front().discrepancy()), 1e-4);
}
