#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "fixtures.hpp"

using namespace opweigh;

namespace {

std::string balance_error(const SystemParams& T, double R0, Bracket br) {
    try {
        balance(T, GaugeReference(R0), br);
    } catch (const NumericalError& e) {
        return e.what();
    }
    return "";
}

// L = -(z^2 + 1/2), Q = Q_dag = 1: R = 1 / (z^2 + 1/2) hits 1 at z = +-sqrt(1/2).
SystemParams two_roots() {
    const auto m = [](double v) { return Matrix::Constant(1, 1, v); };
    const auto v = [](double x) { return Vector::Constant(1, x); };
    return {PolyMatrix(1, {m(-0.5), m(0.0), m(-1.0)}), PolyVector(1, {v(1)}), PolyVector(1, {v(1)})};
}

} // namespace

TEST(Constraint, OneDimensionalBalance) {
    const CombinedFamily f = oneD_family(2, 1, 3, 1);
    for (double eps : {-0.5, 0.0, 0.6, 1.0}) {
        const BalancePoint bp = balance(f.at_excitation(eps), GaugeReference(1.0), fixtures::oned_bracket());
        EXPECT_NEAR(bp.z, -eps / 2, 1e-13);
        EXPECT_LE(std::abs(bp.residual), 1e-12);
        EXPECT_NEAR(bp.fluxes.flux(0), 1.0, 1e-12);
        EXPECT_NEAR(bp.fluxes.adjoint_flux(0), 1.0 / 3.0, 1e-12);
        EXPECT_NEAR(constrained_value([&](double z) { return 2 * z; }, bp), -eps, 1e-12);
    }
}

TEST(Constraint, FailureModes) {
    const SystemParams T = oneD_family(2, 1, 3, 1).base();
    EXPECT_EQ(balance_error(T, 1.0, {0.1, 0.9}), "no sign change in bracket");
    EXPECT_EQ(balance_error(T, 1.0, {1.0, 2.0}), "criticality inside bracket");
    EXPECT_EQ(balance_error(two_roots(), 1.0, {-1.0, 1.0}), "non-unique root");
    EXPECT_NEAR(balance(two_roots(), GaugeReference(1.0), {0.0, 1.0}).z, std::sqrt(0.5), 1e-13);
    EXPECT_THROW(balance(T, GaugeReference(1.0), {0.5, 0.5}), InputError);
}

TEST(Constraint, WorkedInstanceBalancesAtMinusTwo) {
    const fixtures::Worked2D w;
    const ShiftedFamily sf = shift_to_balance(w.family(), GaugeReference(1.0), w.bracket);
    EXPECT_NEAR(sf.shift, -2.0, 1e-13);
    EXPECT_NEAR(sf.bracket.lo, -1.0, 1e-13);
    EXPECT_NEAR(sf.bracket.hi, 1.5, 1e-13);
    const BalancePoint bp = balance(sf.family.base(), GaugeReference(1.0), sf.bracket);
    EXPECT_NEAR(bp.z, 0.0, 1e-13);
    ASSERT_TRUE(bp.spectral.has_value());
}

TEST(Constraint, GaugeRescalingKeepsControlAndFlux) {
    const fixtures::Worked2D w;
    const SystemParams T = w.family().base();
    const GaugeReference R0(1.0);
    const BalancePoint ref = balance(T, R0, w.bracket);
    for (double alpha : {-3.0, 0.25, 7.0}) {
        const auto c = gauge_rescale(T, R0, alpha);
        EXPECT_DOUBLE_EQ(c.R0.value(), alpha);
        const BalancePoint bp = balance(c.family, c.R0, w.bracket);
        EXPECT_NEAR(bp.z, ref.z, 1e-13);
        EXPECT_LE((bp.fluxes.flux - ref.fluxes.flux).norm(), 1e-12);
        EXPECT_LE((bp.fluxes.adjoint_flux - alpha * ref.fluxes.adjoint_flux).norm(), 1e-12 * std::abs(alpha));
    }
    try {
        gauge_rescale(T, R0, 0.0);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "zero gauge factor");
    }
}

TEST(Constraint, NormalizeGauge) {
    const fixtures::Worked2D w;
    const auto c = normalize_gauge(w.family(), GaugeReference(4.0));
    EXPECT_DOUBLE_EQ(c.R0.value(), 1.0);
    EXPECT_DOUBLE_EQ(c.family.base()(0.0).Qdag(0), 0.5);
}
