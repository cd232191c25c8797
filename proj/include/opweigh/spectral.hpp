#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"

namespace opweigh {

/// Fundamental eigenpair of L with the adjoint eigenvector normalized so
/// that <phi_dag, phi> = 1. `gap` is the smallest modulus among the other
/// eigenvalues (+inf in dimension one); it stands in for the operator
/// lower bound of L restricted to the harmonic subspace.
struct SpectralData {
    double sigma = 0.0;
    Vector phi;
    Vector phi_dag;
    double gap = std::numeric_limits<double>::infinity();

    /// Same data seen from the adjoint system (phi and phi_dag swapped).
    SpectralData adjoint() const { return {sigma, phi_dag, phi, gap}; }
};

namespace detail {

// Unit vector spanning the (numerical) null space of M.
inline Vector null_vector(const Matrix& M) {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    Vector v = svd.matrixV().col(M.cols() - 1);
    return v / v.norm();
}

inline void fix_sign(Vector& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) {
        v = -v;
    }
}

inline constexpr double kSingularRcond = 64.0 * std::numeric_limits<double>::epsilon();

} // namespace detail

inline SpectralData fundamental_eigenpair(const Matrix& L) {
    const Eigen::Index n = L.rows();
    if (n == 0 || L.cols() != n) {
        throw InputError("operator must be a nonempty square matrix");
    }
    Eigen::EigenSolver<Matrix> es(L, false);
    if (es.info() != Eigen::Success) {
        throw NumericalError("eigensolver failed");
    }
    const auto ev = es.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(ev(a)) < std::abs(ev(b)); });

    const std::complex<double> lead = ev(order[0]);
    const double scale = std::max(L.norm(), std::numeric_limits<double>::min());
    if (std::abs(lead.imag()) > 1e-12 * scale) {
        throw NumericalError("complex fundamental");
    }
    SpectralData sd;
    sd.sigma = lead.real();
    if (n > 1) {
        const double second = std::abs(ev(order[1]));
        if (second - std::abs(sd.sigma) < 1e-8 * second || second == 0.0) {
            throw NumericalError("degenerate fundamental");
        }
        sd.gap = second;
    }

    const Matrix shift = sd.sigma * Matrix::Identity(n, n);
    sd.phi = detail::null_vector(L - shift);
    detail::fix_sign(sd.phi);
    Vector phi_dag = detail::null_vector(L.transpose() - shift);
    const double overlap = phi_dag.dot(sd.phi);
    if (std::abs(overlap) < 1e-10) {
        throw NumericalError("biorthogonality breakdown");
    }
    sd.phi_dag = phi_dag / overlap;
    return sd;
}

/// v - phi <phi_dag, v>: projection on the harmonic subspace along phi.
inline Vector project_harmonic(const Vector& v, const SpectralData& sd) {
    return v - sd.phi * sd.phi_dag.dot(v);
}

/// v - phi_dag <phi, v>.
inline Vector project_harmonic_adjoint(const Vector& v, const SpectralData& sd) {
    return v - sd.phi_dag * sd.phi.dot(v);
}

/// Harmonic solution x in phi_dag-orthogonal complement with L x = projected b,
/// from the bordered system [[L, phi], [phi_dag^T, 0]] [x; mu] = [b~; 0].
inline Vector harmonic_solve(const Matrix& L, const SpectralData& sd, const Vector& b) {
    const Eigen::Index n = L.rows();
    Matrix M(n + 1, n + 1);
    M.topLeftCorner(n, n) = L;
    M.topRightCorner(n, 1) = sd.phi;
    M.bottomLeftCorner(1, n) = sd.phi_dag.transpose();
    M(n, n) = 0.0;
    Eigen::PartialPivLU<Matrix> lu(M);
    if (!(lu.rcond() > detail::kSingularRcond)) {
        throw NumericalError("singular bordered system");
    }
    Vector rhs(n + 1);
    rhs.head(n) = project_harmonic(b, sd);
    rhs(n) = 0.0;
    const Vector x = lu.solve(rhs);
    return x.head(n);
}

/// Harmonic solve for the adjoint system (L^T, phi_dag and phi swapped).
inline Vector harmonic_solve_adjoint(const Matrix& L, const SpectralData& sd, const Vector& b) {
    return harmonic_solve(L.transpose(), sd.adjoint(), b);
}

namespace detail {

inline Eigen::PartialPivLU<Matrix> checked_lu(const Matrix& L) {
    Eigen::PartialPivLU<Matrix> lu(L);
    if (!(lu.rcond() > kSingularRcond)) {
        throw NumericalError("singular operator");
    }
    return lu;
}

} // namespace detail

/// Phi = -L^{-1} Q.
inline Vector flux(const Matrix& L, const Vector& Q) { return -detail::checked_lu(L).solve(Q); }

/// Phi_dag = -L^{-T} Q_dag.
inline Vector adjoint_flux(const Matrix& L, const Vector& Qdag) {
    return -detail::checked_lu(L.transpose()).solve(Qdag);
}

/// R = <Q_dag, Phi(L, Q)>.
inline double gauge_output(const Matrix& L, const Vector& Q, const Vector& Qdag) {
    return Qdag.dot(flux(L, Q));
}

inline double gauge_output(const ParamTriple& T) { return gauge_output(T.L, T.Q, T.Qdag); }

/// Direct and adjoint fluxes of one parameter point, with the gauge output
/// and the harmonicity omega = <Q_dag, Phi~> / R.
struct FluxPair {
    Vector flux;
    Vector adjoint_flux;
    double gauge = 0.0;
    double harmonicity = 0.0;
};

/// Fluxes and gauge output only; harmonicity needs the spectral split.
inline FluxPair solve_fluxes(const ParamTriple& T) {
    const auto lu = detail::checked_lu(T.L);
    FluxPair fp;
    fp.flux = -lu.solve(T.Q);
    fp.adjoint_flux = -detail::checked_lu(T.L.transpose()).solve(T.Qdag);
    fp.gauge = T.Qdag.dot(fp.flux);
    fp.harmonicity = std::numeric_limits<double>::quiet_NaN();
    return fp;
}

inline FluxPair flux_pair(const ParamTriple& T, const SpectralData& sd) {
    FluxPair fp = solve_fluxes(T);
    fp.harmonicity = T.Qdag.dot(project_harmonic(fp.flux, sd)) / fp.gauge;
    return fp;
}

/// Differential of the gauge output along a parameter direction:
/// dR_T(dT) = <Phi_dag, dL Phi + dQ> + <dQ_dag, Phi>.
inline double gauge_differential(const FluxPair& fp, const ParamTriple& dT) {
    return fp.adjoint_flux.dot(dT.L * fp.flux + dT.Q) + dT.Qdag.dot(fp.flux);
}

/// Fundamental/harmonic split of the flux.
struct FluxDecomposition {
    double amplitude = 0.0;       ///< <phi_dag, Phi> = -<phi_dag, Q>/sigma
    Vector harmonic;              ///< Phi~ = -L~^{-1} Q~
    double omega = 0.0;           ///< <Q_dag, Phi~> / R
    double omega_adjoint = 0.0;   ///< <Phi_dag~, Q> / R
    double sigma_check = 0.0;     ///< sigma recovered from R; NaN when Q is orthogonal to phi_dag
    Vector recomposed;            ///< R (1 - omega) / <Q_dag, phi> phi + Phi~
};

inline FluxDecomposition decompose_flux(const Matrix& L, const Vector& Q, const Vector& Qdag,
                                        const SpectralData& sd) {
    const double source_coupling = sd.phi_dag.dot(Q);
    const double coupling_tol = 1e-14 * std::max(1.0, Q.norm() * sd.phi_dag.norm());
    if (std::abs(source_coupling) <= coupling_tol && std::abs(sd.sigma) <= 1e-14 * std::max(1.0, L.norm())) {
        throw NumericalError("zero fundamental source coupling");
    }
    const double R = gauge_output(L, Q, Qdag);
    FluxDecomposition d;
    d.amplitude = -source_coupling / sd.sigma;
    d.harmonic = harmonic_solve(L, sd, -Q);
    d.omega = Qdag.dot(d.harmonic) / R;
    const Vector harmonic_adj = harmonic_solve_adjoint(L, sd, -Qdag);
    d.omega_adjoint = harmonic_adj.dot(Q) / R;
    const double gauge_coupling = Qdag.dot(sd.phi);
    const double fundamental_part = R * (1.0 - d.omega);
    d.sigma_check = std::abs(source_coupling) <= coupling_tol
                        ? std::numeric_limits<double>::quiet_NaN()
                        : -gauge_coupling * source_coupling / fundamental_part;
    d.recomposed = fundamental_part / gauge_coupling * sd.phi + d.harmonic;
    return d;
}

/// Per-point view of how close L is to the critical limit.
struct CriticalityReport {
    double sigma = 0.0;
    double gap = 0.0;
    double separation_ratio = 0.0;   ///< |sigma| / gap
    double harmonicity = 0.0;        ///< omega, small near criticality
    double source_coupling = 0.0;    ///< <phi_dag, Q>
    double gauge_coupling = 0.0;     ///< <Q_dag, phi>
    double determinant = 0.0;
};

inline CriticalityReport criticality(const ParamTriple& T, const SpectralData& sd) {
    CriticalityReport r;
    r.sigma = sd.sigma;
    r.gap = sd.gap;
    r.separation_ratio = std::abs(sd.sigma) / sd.gap;
    r.source_coupling = sd.phi_dag.dot(T.Q);
    r.gauge_coupling = T.Qdag.dot(sd.phi);
    r.determinant = T.L.determinant();
    r.harmonicity = flux_pair(T, sd).harmonicity;
    return r;
}

} // namespace opweigh
