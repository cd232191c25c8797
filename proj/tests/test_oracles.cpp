#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fixtures.hpp"

using namespace opweigh;
using fixtures::mat2;

TEST(Oracles, ComatrixIdentities) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const auto r = [&] { return mat2(u(rng), u(rng), u(rng), u(rng)); };
    const Matrix I = Matrix::Identity(2, 2);
    for (int i = 0; i < 200; ++i) {
        const Matrix A = r();
        const Matrix B = r();
        EXPECT_LE((comatrix(A) * A - A.determinant() * I).norm(), 1e-12);
        EXPECT_LE((A * comatrix(A) - A.determinant() * I).norm(), 1e-12);
        EXPECT_NEAR(codeterminant(A, A), 2 * A.determinant(), 1e-12);
        EXPECT_NEAR(codeterminant(A, B), codeterminant(B, A), 1e-12);
        EXPECT_NEAR((A + B).determinant(), A.determinant() + codeterminant(A, B) + B.determinant(), 1e-12);
        EXPECT_LE((comatrix(A + B) - comatrix(A) - comatrix(B)).norm(), 1e-12);
    }
    EXPECT_THROW(comatrix(Matrix::Identity(3, 3)), InputError);
}

TEST(Oracles, OneDimensionalClosedForms) {
    const OneDResult r = oneD_oracle(2, 1, 3, 1, 0.6);
    EXPECT_DOUBLE_EQ(r.z, -0.3);
    EXPECT_DOUBLE_EQ(r.flux, 1.0);
    EXPECT_DOUBLE_EQ(r.adjoint_flux, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.Z1, 0.2);
    EXPECT_DOUBLE_EQ(r.delta_Z2, -0.2);
    EXPECT_THROW(oneD_oracle(0, 1, 3, 1, 0.5), NumericalError);
}

TEST(Oracles, WorkedInstanceConstants) {
    const fixtures::Worked2D w;
    const TwoDResult r = twoD_oracle(w.B, w.C, w.Q, w.Qdag, 0.5);
    const auto& k = r.constants;
    EXPECT_DOUBLE_EQ(k.alpha1, -2.0);
    EXPECT_DOUBLE_EQ(k.alpha2, 1.0);
    EXPECT_DOUBLE_EQ(k.alpha3, -0.5);
    EXPECT_DOUBLE_EQ(k.alpha4, 0.5);
    EXPECT_DOUBLE_EQ(k.delta_T0, -0.5);
    EXPECT_NEAR(k.alpha1 * k.alpha4 + k.alpha2, -r.c11 / r.b11, 1e-15);
    EXPECT_NEAR(r.inner_product_11, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(r.z, 0.5);
    EXPECT_NEAR(r.Z1, std::log(0.75), 1e-15);
    // Phi_0 = (0.5, 0), Phi_1 = (-0.25, 0.5)
    EXPECT_NEAR(r.flux[0](0), 0.5, 1e-15);
    EXPECT_NEAR(r.flux[0](1), 0.0, 1e-15);
    EXPECT_NEAR(r.flux[1](0), -0.25, 1e-15);
    EXPECT_NEAR(r.flux[1](1), 0.5, 1e-15);
    for (std::size_t n = 0; n < r.weight_coeffs.size(); ++n) {
        EXPECT_NEAR(r.weight_coeffs[n], -0.5 * std::pow(0.5, static_cast<double>(n)), 1e-15);
    }
}

TEST(Oracles, WorkedGaugeMatchesDirectSolve) {
    const fixtures::Worked2D w;
    const TwoDResult r = twoD_oracle(w.B, w.C, w.Q, w.Qdag, 0.0);
    const CombinedFamily f = w.family();
    for (double eps : {0.0, 0.3}) {
        for (double z : {-0.7, 0.4, 1.2}) {
            EXPECT_NEAR(r.gauge(eps, z), gauge_output(f(eps, z + r.constants.alpha1)), 1e-13);
        }
    }
}

TEST(Oracles, ConstraintViolationRejected) {
    const fixtures::Worked2D w;
    try {
        twoD_oracle(Matrix::Identity(2, 2), w.C, w.Q, w.Qdag, 0.0);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "constraints det B = det C = B*C = 0 violated");
    }
}

TEST(Oracles, BruteForceOnOneDimensional) {
    std::vector<double> grid;
    for (int k = -4; k <= 4; ++k) {
        grid.push_back(0.05 * k);
    }
    const BruteForceFit fit =
        brute_force_oracle(oneD_family(2, 1, 3, 1), GaugeReference(1.0), fixtures::oned_bracket(), grid, 3);
    EXPECT_NEAR(fit.z[0], 0.0, 1e-12);
    EXPECT_NEAR(fit.z[1], -0.5, 1e-11);
    EXPECT_NEAR(fit.z[2], 0.0, 1e-9);
    EXPECT_NEAR(fit.flux[0](0), 1.0, 1e-12);
    EXPECT_LE(fit.residual, 1e-12);
}

TEST(Oracles, RandomInstanceIsBalancedAndReproducible) {
    for (int dim : {3, 5, 8}) {
        const RandomInstance a = random_instance(99, dim);
        const RandomInstance b = random_instance(99, dim);
        EXPECT_EQ(a.family, b.family);
        EXPECT_EQ(a.family.dim(), dim);
        EXPECT_TRUE(is_linear_control(a.family));
        EXPECT_TRUE(is_remote(a.family));
        EXPECT_TRUE(has_unexcited_sources(a.family));
        EXPECT_NEAR(gauge_output(a.family.base()(0.0)), 1.0, 1e-12);
        const BalancePoint bp = balance(a.family.base(), a.R0, a.bracket);
        EXPECT_NEAR(bp.z, 0.0, 1e-12);
    }
    EXPECT_THROW(random_instance(1, 0), InputError);
}
