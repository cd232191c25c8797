#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "opweigh/constraint.hpp"
#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"
#include "opweigh/spectral.hpp"

namespace opweigh {

namespace detail {

inline void require_2x2(const Matrix& A) {
    if (A.rows() != 2 || A.cols() != 2) {
        throw InputError("dimension must be 2");
    }
}

} // namespace detail

/// Transposed matrix of cofactors of a 2x2 matrix.
inline Matrix comatrix(const Matrix& A) {
    detail::require_2x2(A);
    Matrix C(2, 2);
    C << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
    return C;
}

/// det(a1 | b2) + det(b1 | a2), with a1, b2, ... the columns of A and B.
inline double codeterminant(const Matrix& A, const Matrix& B) {
    detail::require_2x2(A);
    detail::require_2x2(B);
    return A(0, 0) * B(1, 1) - B(0, 1) * A(1, 0) + B(0, 0) * A(1, 1) - A(0, 1) * B(1, 0);
}

struct OneDResult {
    double z = 0.0;
    double flux = 0.0;
    double adjoint_flux = 0.0;
    double Z1 = 0.0;
    double delta_Z2 = 0.0;
};

/// Closed forms for L = B z + C eps - Q_dag Q in one dimension, R0 = 1.
inline OneDResult oneD_oracle(double B, double C, double Q, double Qdag, double eps) {
    if (B == 0.0 || Q * Qdag == 0.0) {
        throw NumericalError("degenerate 1D instance");
    }
    OneDResult r;
    r.z = -C * eps / B;
    r.flux = 1.0 / Qdag;
    r.adjoint_flux = 1.0 / Q;
    r.Z1 = C * eps / (Qdag * Q);
    r.delta_Z2 = B * r.z / (Qdag * Q);
    return r;
}

/// The 1D family (base B z - Q_dag Q, perturbation C).
inline CombinedFamily oneD_family(double B, double C, double Q, double Qdag) {
    const auto m = [](double v) { return Matrix::Constant(1, 1, v); };
    const auto v = [](double x) { return Vector::Constant(1, x); };
    SystemParams base(PolyMatrix(1, {m(-Qdag * Q), m(B)}), PolyVector(1, {v(Q)}), PolyVector(1, {v(Qdag)}));
    SystemParams pert(PolyMatrix(1, {m(C)}), PolyVector::zero(1), PolyVector::zero(1));
    return {base, pert};
}

struct TwoDConstants {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha3 = 0.0;
    double alpha4 = 0.0;
    double delta_T0 = 0.0;
};

struct TwoDResult {
    TwoDConstants constants;
    double QBQ = 0.0;   ///< <Q_dag | comatrix(B) Q>
    double QCQ = 0.0;   ///< <Q_dag | comatrix(C) Q>
    double z = 0.0;     ///< z(eps) in the shifted variable
    double Z1 = 0.0;
    double inner_product_11 = 0.0;   ///< <Phi_dag_1 | C Phi_1>
    std::vector<Vector> flux;        ///< Phi_0 .. Phi_N
    std::vector<Vector> adjoint_flux;
    std::vector<double> weight_coeffs;   ///< <dT>_0 .. <dT>_N

    double b11 = 0.0;
    double c11 = 0.0;
    double q11 = 0.0;   ///< q_dag_1 q_1

    /// R(eps, z) in the shifted variable.
    double gauge(double eps, double z) const {
        const double num = QBQ * z + QCQ * eps + constants.alpha1 * QBQ - q11;
        const double den = b11 * z + c11 * eps + b11 * constants.alpha1;
        return num / den;
    }
};

/// Closed forms for the 2x2 family A + z' B + eps C with A = diag(0, -1),
/// under det B = det C = B*C = 0. The shifted control variable is
/// z = z' - alpha1. Series are returned to order N.
inline TwoDResult twoD_oracle(const Matrix& B, const Matrix& C, const Vector& Q, const Vector& Qdag, double eps,
                              int N = 8) {
    detail::require_2x2(B);
    detail::require_2x2(C);
    const double scale = std::max({B.norm() * B.norm(), C.norm() * C.norm(), B.norm() * C.norm(), 1.0});
    if (std::abs(B.determinant()) > 1e-12 * scale || std::abs(C.determinant()) > 1e-12 * scale ||
        std::abs(codeterminant(B, C)) > 1e-12 * scale) {
        throw NumericalError("constraints det B = det C = B*C = 0 violated");
    }
    Matrix A(2, 2);
    A << 0.0, 0.0, 0.0, -1.0;
    const Matrix Abar = comatrix(A);
    const Matrix Bbar = comatrix(B);
    const Matrix Cbar = comatrix(C);

    TwoDResult r;
    r.b11 = B(0, 0);
    r.c11 = C(0, 0);
    r.q11 = Qdag(0) * Q(0);
    r.QBQ = Qdag.dot(Bbar * Q);
    r.QCQ = Qdag.dot(Cbar * Q);
    if (r.b11 == 0.0 || r.q11 == 0.0 || r.QBQ == r.b11) {
        throw NumericalError("degenerate 2D instance");
    }
    auto& k = r.constants;
    k.alpha1 = r.q11 / (r.QBQ - r.b11);
    k.alpha2 = -(r.QCQ - r.c11) / (r.QBQ - r.b11);
    k.alpha3 = 1.0 / (r.b11 * k.alpha1);
    k.alpha4 = (r.b11 * r.QCQ - r.c11 * r.QBQ) / (r.b11 * r.q11);
    k.delta_T0 = (r.QBQ - r.b11) * (r.QCQ - r.c11) / (r.q11 * r.b11);

    r.z = k.alpha2 * eps;
    r.Z1 = k.alpha4 == 0.0 ? k.delta_T0 * eps : -(k.delta_T0 / k.alpha4) * std::log1p(-eps * k.alpha4);

    const double cb = r.c11 / r.b11;
    const Vector phi0 = k.alpha3 * (Abar + k.alpha1 * Bbar) * Q;
    const Vector dual0 = k.alpha3 * (Abar.transpose() + k.alpha1 * Bbar.transpose()) * Qdag;
    const Vector phi1 = k.alpha3 * (k.alpha4 * Abar - cb * Bbar + Cbar) * Q;
    const Vector dual1 = k.alpha3 * (k.alpha4 * Abar.transpose() - cb * Bbar.transpose() + Cbar.transpose()) * Qdag;
    r.inner_product_11 = dual1.dot(C * phi1);
    r.flux.push_back(phi0);
    r.adjoint_flux.push_back(dual0);
    for (int p = 1; p <= N; ++p) {
        r.flux.push_back(std::pow(k.alpha4, p - 1) * phi1);
        r.adjoint_flux.push_back(std::pow(k.alpha4, p - 1) * dual1);
    }
    const double cross = dual0.dot(C * phi1) + dual1.dot(C * phi0);
    r.weight_coeffs.push_back(dual0.dot(C * phi0));
    for (int n = 1; n <= N; ++n) {
        double t = std::pow(k.alpha4, n - 1) * cross;
        if (n >= 2) {
            t += std::pow(k.alpha4, n - 2) * (n - 1) * r.inner_product_11;
        }
        r.weight_coeffs.push_back(t);
    }
    return r;
}

/// The 2D family A + z' B + eps C (unshifted control variable).
inline CombinedFamily twoD_family(const Matrix& B, const Matrix& C, const Vector& Q, const Vector& Qdag) {
    Matrix A(2, 2);
    A << 0.0, 0.0, 0.0, -1.0;
    SystemParams base(PolyMatrix(2, {A, B}), PolyVector(2, {Q}), PolyVector(2, {Qdag}));
    SystemParams pert(PolyMatrix(2, {C}), PolyVector::zero(2), PolyVector::zero(2));
    return {base, pert};
}

struct BruteForceFit {
    std::vector<double> z;              ///< fitted coefficients of z(eps)
    std::vector<Vector> flux;           ///< fitted coefficients of Phi(eps)
    std::vector<Vector> adjoint_flux;   ///< fitted coefficients of Phi_dag(eps)
    double residual = 0.0;              ///< largest normalized fit residual
};

/// Direct constrained solves on the grid and a least-squares polynomial fit
/// of z, Phi and Phi_dag. No series machinery is involved.
inline BruteForceFit brute_force_oracle(const CombinedFamily& T2, const GaugeReference& R0, Bracket br,
                                        const std::vector<double>& eps_grid, int degree,
                                        double residual_limit = 1e-8) {
    const auto m = static_cast<Eigen::Index>(eps_grid.size());
    if (degree < 0 || m < degree + 1) {
        throw InputError("grid too small for the fit degree");
    }
    const auto n = T2.dim();
    // columns: z, flux components, adjoint flux components
    Matrix Y(m, 1 + 2 * n);
    Matrix V(m, degree + 1);
    double eps_scale = 0.0;
    for (double e : eps_grid) {
        eps_scale = std::max(eps_scale, std::abs(e));
    }
    if (eps_scale == 0.0) {
        eps_scale = 1.0;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const double e = eps_grid[static_cast<std::size_t>(i)];
        const BalancePoint bp = balance(T2.at_excitation(e), R0, br);
        Y(i, 0) = bp.z;
        Y.block(i, 1, 1, n) = bp.fluxes.flux.transpose();
        Y.block(i, 1 + n, 1, n) = bp.fluxes.adjoint_flux.transpose();
        double pw = 1.0;
        for (int j = 0; j <= degree; ++j) {
            V(i, j) = pw;
            pw *= e / eps_scale;
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(V);
    if (qr.rank() < degree + 1) {
        throw NumericalError("rank-deficient sample set");
    }
    Matrix coef = qr.solve(Y);
    double unscale = 1.0;
    for (int j = 0; j <= degree; ++j) {
        coef.row(j) *= unscale;
        unscale /= eps_scale;
    }
    BruteForceFit fit;
    const Matrix Vraw = [&] {
        Matrix W(m, degree + 1);
        for (Eigen::Index i = 0; i < m; ++i) {
            double pw = 1.0;
            for (int j = 0; j <= degree; ++j) {
                W(i, j) = pw;
                pw *= eps_grid[static_cast<std::size_t>(i)];
            }
        }
        return W;
    }();
    const Matrix resid = Vraw * coef - Y;
    for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        const double s = std::max(Y.col(c).cwiseAbs().maxCoeff(), 1e-300);
        fit.residual = std::max(fit.residual, resid.col(c).cwiseAbs().maxCoeff() / s);
    }
    if (fit.residual > residual_limit) {
        throw NumericalError("fit residual too large");
    }
    for (int j = 0; j <= degree; ++j) {
        fit.z.push_back(coef(j, 0));
        fit.flux.push_back(coef.block(j, 1, 1, n).transpose());
        fit.adjoint_flux.push_back(coef.block(j, 1 + n, 1, n).transpose());
    }
    return fit;
}

struct RandomInstance {
    CombinedFamily family;
    GaugeReference R0;
    Bracket bracket;
};

struct RandomInstanceOptions {
    double fundamental = 0.05;         ///< modulus of the small eigenvalue of A
    double perturbation_scale = 0.05;  ///< size of dL relative to unit-scale entries
};

/// Random linear, remote instance with unexcited sources:
/// T(z) = (A + z B, Q, Q_dag), dT = (C, 0, 0), balanced at z = 0 with R0 = 1.
/// A has one small real eigenvalue and the others in +-[1, 3].
inline RandomInstance random_instance(std::uint64_t seed, int dim, const RandomInstanceOptions& opt = {}) {
    if (dim < 1) {
        throw InputError("dimension must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> mag(1.0, 3.0);
    const auto rand_matrix = [&](int r, int c) {
        Matrix M(r, c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) {
                M(i, j) = u(rng);
            }
        }
        return M;
    };
    for (int attempt = 0; attempt < 100; ++attempt) {
        Matrix S = Matrix::Identity(dim, dim) + 0.3 * rand_matrix(dim, dim);
        Vector lambda(dim);
        lambda(0) = (u(rng) < 0.0 ? -1.0 : 1.0) * opt.fundamental;
        for (int i = 1; i < dim; ++i) {
            lambda(i) = (u(rng) < 0.0 ? -1.0 : 1.0) * mag(rng);
        }
        const Matrix A = S * lambda.asDiagonal() * S.inverse();
        const Matrix B = rand_matrix(dim, dim);
        const Matrix C = opt.perturbation_scale * rand_matrix(dim, dim);
        const Vector Q = rand_matrix(dim, 1).col(0).cwiseAbs() + Vector::Constant(dim, 0.1);
        Vector Qdag = rand_matrix(dim, 1).col(0).cwiseAbs() + Vector::Constant(dim, 0.1);

        // poles of R(z): det(A + z B) = 0 at the real generalized eigenvalues of (A, -B)
        Eigen::GeneralizedEigenSolver<Matrix> ges(A, -B);
        double nearest = std::numeric_limits<double>::infinity();
        const auto alphas = ges.alphas();
        const auto betas = ges.betas();
        for (Eigen::Index i = 0; i < alphas.size(); ++i) {
            if (std::abs(alphas(i).imag()) <= 1e-12 * std::abs(alphas(i)) && betas(i) != 0.0) {
                nearest = std::min(nearest, std::abs(alphas(i).real() / betas(i)));
            }
        }
        if (!(nearest > 1e-3)) {
            continue;
        }
        const double R = gauge_output(A, Q, Qdag);
        if (!std::isfinite(R) || std::abs(R) < 1e-3) {
            continue;
        }
        Qdag /= R;
        SystemParams base(PolyMatrix(dim, {A, B}), PolyVector(dim, {Q}), PolyVector(dim, {Qdag}));
        SystemParams pert(PolyMatrix(dim, {C}), PolyVector::zero(dim), PolyVector::zero(dim));
        const double half = std::min(0.5 * nearest, 1.0);
        RandomInstance inst{{base, pert}, GaugeReference(1.0), {-half, half}};
        try {
            const BalancePoint bp = balance(inst.family.base(), inst.R0, inst.bracket);
            if (!bp.spectral || std::abs(bp.z) > 1e-12) {
                continue;
            }
        } catch (const NumericalError&) {
            continue;
        }
        return inst;
    }
    throw NumericalError("no admissible random instance");
}

} // namespace opweigh
