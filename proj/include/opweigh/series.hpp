#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "opweigh/constraint.hpp"
#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"
#include "opweigh/spectral.hpp"

namespace opweigh {

/// Power series in eps truncated at order N; coeffs has N + 1 entries.
template <class T>
struct TruncatedSeries {
    std::vector<T> coeffs;

    int order() const { return static_cast<int>(coeffs.size()) - 1; }
    const T& operator[](int n) const { return coeffs[static_cast<std::size_t>(n)]; }
    T& operator[](int n) { return coeffs[static_cast<std::size_t>(n)]; }

    T operator()(double eps) const {
        T acc = coeffs.back() * 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
            acc = acc * eps + *it;
        }
        return acc;
    }
};

using ScalarSeries = TruncatedSeries<double>;
using VectorSeries = TruncatedSeries<Vector>;

namespace detail {

// Calls visit(k, weight) for every partition of n into parts 1..n-1,
// where k is the number of parts and weight = k!/prod(q_p!) prod z_p^q_p.
inline void for_each_partition(int n, const std::vector<double>& z,
                               const std::function<void(int, double)>& visit) {
    // parts are chosen in decreasing order; mult tracks the current run
    std::function<void(int, int, int, double, double, int)> rec =
        [&](int remaining, int max_part, int k, double prod, double kfact_over, int run) {
            if (remaining == 0) {
                visit(k, prod * kfact_over);
                return;
            }
            for (int p = std::min(max_part, remaining); p >= 1; --p) {
                const int next_run = p == max_part ? run + 1 : 1;
                // k!/prod(q!) grows by (k + 1) / next_run when one more part is added
                rec(remaining - p, p, k + 1, prod * z[static_cast<std::size_t>(p)],
                    kfact_over * (k + 1) / next_run, next_run);
            }
        };
    for (int first = n - 1; first >= 1; --first) {
        rec(n - first, first, 1, z[static_cast<std::size_t>(first)], 1.0, 1);
    }
}

} // namespace detail

/// Remainder term T_n(z_1..z_{n-1}) of the composition (T o z)_n = z_n T' + T_n.
/// `taylor` holds T^(k)(z0)/k! for k = 0..n; z[p] is the eps^p coefficient
/// of the control series (z[0] is not used).
inline ParamTriple remainder_term(const std::vector<ParamTriple>& taylor, const std::vector<double>& z, int n) {
    const auto dim = taylor.front().dim();
    if (n < 2) {
        return ParamTriple::zero(dim);
    }
    std::vector<double> by_degree(static_cast<std::size_t>(n) + 1, 0.0);
    detail::for_each_partition(n, z, [&](int k, double w) { by_degree[static_cast<std::size_t>(k)] += w; });
    ParamTriple out = ParamTriple::zero(dim);
    for (int k = 2; k <= n && k < static_cast<int>(taylor.size()); ++k) {
        const double w = by_degree[static_cast<std::size_t>(k)];
        if (w != 0.0) {
            out += taylor[static_cast<std::size_t>(k)] * w;
        }
    }
    return out;
}

/// Coefficients of eps -> T(z(eps)) up to the order of z. z[0] is the
/// expansion point.
inline TruncatedSeries<ParamTriple> compose(const SystemParams& T, const ScalarSeries& z) {
    const int N = z.order();
    const auto taylor = T.taylor(z[0], std::max(N, 1));
    TruncatedSeries<ParamTriple> out;
    out.coeffs.push_back(taylor[0]);
    for (int n = 1; n <= N; ++n) {
        out.coeffs.push_back(taylor[1] * z[n] + remainder_term(taylor, z.coeffs, n));
    }
    return out;
}

/// Perturbation series of the constrained solution of T(z) + eps dT(z).
struct SeriesBundle {
    CombinedFamily family;
    GaugeReference R0;
    ScalarSeries z;               ///< z[0] is the balancing value of the reference
    VectorSeries flux;
    VectorSeries adjoint_flux;
    double control_weight = 0.0;  ///< <T'> at the reference
    SpectralData spectral;
    /// max_n |z_n(direct) - z_n(adjoint)|, relative to max |z_n|.
    double adjoint_consistency = 0.0;

    int order() const { return z.order(); }
};

namespace detail {

// Taylor coefficients of T and dT at z0 in the direct or adjoint layout.
struct Expansion {
    std::vector<ParamTriple> T;
    std::vector<ParamTriple> dT;
};

inline Expansion expand(const CombinedFamily& T2, double z0, int N, bool adjoint) {
    Expansion e{T2.base().taylor(z0, N + 1), T2.pert().taylor(z0, N + 1)};
    if (adjoint) {
        for (auto& t : e.T) {
            t = t.adjoint();
        }
        for (auto& t : e.dT) {
            t = t.adjoint();
        }
    }
    return e;
}

// <X>_{0p} = <Psi0, X.L Phi_p> + <X.Qdag, Phi_p> + [p = 0] <Psi0, X.Q>,
// Psi0 being the reference adjoint flux (or its harmonic projection).
inline double bracket_0p(const ParamTriple& X, const Vector& psi0, const Vector& phi_p, bool p_is_zero) {
    double v = psi0.dot(X.L * phi_p) + X.Qdag.dot(phi_p);
    if (p_is_zero) {
        v += psi0.dot(X.Q);
    }
    return v;
}

// The fundamental amplitude of Phi_n comes from the constraint,
// -<Q_dag, phi> a_n = sum of harmonic brackets, which stays well conditioned
// near criticality. When <Q_dag, phi> vanishes it falls back to
// a_n = <phi_dag, r_n> / sigma, r_n being the right-hand side L Phi_n = r_n.
struct AmplitudeRoute {
    double gauge_coupling = 0.0;
    bool use_constraint = true;

    double amplitude(double harmonic_brackets, const Vector& rhs, const SpectralData& sd) const {
        if (use_constraint) {
            return -harmonic_brackets / gauge_coupling;
        }
        return sd.phi_dag.dot(rhs) / sd.sigma;
    }
};

inline AmplitudeRoute amplitude_route(const ParamTriple& T0, const SpectralData& sd) {
    AmplitudeRoute r;
    r.gauge_coupling = T0.Qdag.dot(sd.phi);
    if (std::abs(r.gauge_coupling) >= 1e-12 * std::max(T0.Qdag.norm() * sd.phi.norm(), 1e-300)) {
        return r;
    }
    if (!(std::abs(sd.sigma) >= 1e-8 * std::max(T0.L.norm(), 1e-300))) {
        throw NumericalError("zero fundamental gauge coupling");
    }
    r.use_constraint = false;
    return r;
}

struct RecursionResult {
    std::vector<double> z;
    std::vector<Vector> flux;
    double control_weight = 0.0;
};

// The general recursion. In the adjoint layout the roles of Q and Q_dag,
// phi and phi_dag, and of the two reference fluxes are swapped.
inline RecursionResult run_recursion(const Expansion& ex, const Vector& flux0, const Vector& dual0,
                                     const SpectralData& sd, int N) {
    const ParamTriple& L0 = ex.T[0];
    const ParamTriple& c1 = ex.T[1];
    const double scale = std::max(c1.L.norm() * flux0.norm() * dual0.norm() + c1.Q.norm() * dual0.norm() +
                                      c1.Qdag.norm() * flux0.norm(),
                                  1e-300);
    const double weight = bracket_0p(c1, dual0, flux0, true);
    if (!(std::abs(weight) >= 1e-12 * scale)) {
        throw NumericalError("zero differential weight");
    }
    const AmplitudeRoute route = amplitude_route(L0, sd);
    const Vector dual0_h = project_harmonic_adjoint(dual0, sd);
    const double weight_h = bracket_0p(c1, dual0_h, flux0, true);

    RecursionResult out;
    out.control_weight = weight;
    out.z.assign(static_cast<std::size_t>(N) + 1, 0.0);
    out.flux.assign(static_cast<std::size_t>(N) + 1, Vector::Zero(flux0.size()));
    out.flux[0] = flux0;
    const Vector c1_action = c1.L * flux0 + c1.Q;

    const auto dim = flux0.size();
    // rem_T[k] = T_k and rem_dT[k] = dT_k; both need z_1..z_{k-1} only
    std::vector<ParamTriple> rem_T(static_cast<std::size_t>(N) + 1, ParamTriple::zero(dim));
    std::vector<ParamTriple> rem_dT(static_cast<std::size_t>(N) + 1, ParamTriple::zero(dim));
    for (int n = 1; n <= N; ++n) {
        rem_T[static_cast<std::size_t>(n)] = remainder_term(ex.T, out.z, n);
        rem_dT[static_cast<std::size_t>(n)] = remainder_term(ex.dT, out.z, n);
        double sum_b = 0.0;
        double sum_bh = 0.0;
        Vector rhs = Vector::Zero(dim);
        for (int p = 0; p < n; ++p) {
            const int k = n - p;
            ParamTriple Xp = ParamTriple::zero(dim);
            if (p >= 1) {
                Xp += c1 * out.z[static_cast<std::size_t>(k)];
            }
            if (k >= 2) {
                Xp += rem_T[static_cast<std::size_t>(k)];
            }
            if (k == 1) {
                Xp += ex.dT[0];
            } else {
                Xp += ex.dT[1] * out.z[static_cast<std::size_t>(k - 1)];
                if (k - 1 >= 2) {
                    Xp += rem_dT[static_cast<std::size_t>(k - 1)];
                }
            }
            const Vector& phi_p = out.flux[static_cast<std::size_t>(p)];
            const double b = bracket_0p(Xp, dual0, phi_p, p == 0);
            sum_b += b;
            sum_bh += bracket_0p(Xp, dual0_h, phi_p, p == 0);
            rhs -= Xp.L * phi_p;
            if (p == 0) {
                rhs -= Xp.Q;
            }
        }
        const double zn = -sum_b / weight;
        out.z[static_cast<std::size_t>(n)] = zn;
        rhs -= zn * c1_action;
        const Vector harmonic = harmonic_solve(L0.L, sd, rhs);
        const double amplitude = route.amplitude(sum_bh + zn * weight_h, rhs, sd);
        out.flux[static_cast<std::size_t>(n)] = amplitude * sd.phi + harmonic;
    }
    return out;
}

} // namespace detail

/// Series of z, Phi and Phi_dag for the constrained problem T + eps dT,
/// expanded around the balanced reference bp. The family need not be
/// pre-shifted; expansion happens at bp.z.
inline SeriesBundle perturbation_series(const CombinedFamily& T2, const GaugeReference& R0, const BalancePoint& bp,
                                        const SpectralData& sd, int N) {
    if (N < 0) {
        throw InputError("series order must be nonnegative");
    }
    const auto direct = detail::run_recursion(detail::expand(T2, bp.z, N, false), bp.fluxes.flux,
                                              bp.fluxes.adjoint_flux, sd, N);
    const auto adjoint = detail::run_recursion(detail::expand(T2, bp.z, N, true), bp.fluxes.adjoint_flux,
                                               bp.fluxes.flux, sd.adjoint(), N);
    SeriesBundle b{T2, R0, {}, {}, {}, direct.control_weight, sd, 0.0};
    b.z.coeffs = direct.z;
    b.z[0] = bp.z;
    b.flux.coeffs = direct.flux;
    b.adjoint_flux.coeffs = adjoint.flux;
    double zmax = 0.0;
    double diff = 0.0;
    for (int n = 1; n <= N; ++n) {
        zmax = std::max(zmax, std::abs(direct.z[static_cast<std::size_t>(n)]));
        diff = std::max(diff, std::abs(direct.z[static_cast<std::size_t>(n)] - adjoint.z[static_cast<std::size_t>(n)]));
    }
    b.adjoint_consistency = zmax > 0.0 ? diff / zmax : diff;
    return b;
}

/// Convenience: balance the reference, take its spectral data, expand.
inline SeriesBundle perturbation_series(const CombinedFamily& T2, const GaugeReference& R0, Bracket br, int N) {
    const BalancePoint bp = balance(T2.base(), R0, br);
    const SpectralData sd = bp.spectral ? *bp.spectral : fundamental_eigenpair(T2.base()(bp.z).L);
    return perturbation_series(T2, R0, bp, sd, N);
}

namespace detail {

// Simplified recursion for T'' = dT'' = 0: no remainder terms.
inline RecursionResult run_linear_recursion(const ParamTriple& T0, const ParamTriple& T1, const ParamTriple& d0,
                                            const ParamTriple& d1, const Vector& flux0, const Vector& dual0,
                                            const SpectralData& sd, int N) {
    const auto dim = flux0.size();
    const Vector dual0_h = project_harmonic_adjoint(dual0, sd);
    const auto br = [&](const ParamTriple& X, const Vector& psi, const Vector& phi, bool zero) {
        return bracket_0p(X, psi, phi, zero);
    };
    const double weight = br(T1, dual0, flux0, true);
    const double scale = std::max(T1.L.norm() * flux0.norm() * dual0.norm() + T1.Q.norm() * dual0.norm() +
                                      T1.Qdag.norm() * flux0.norm(),
                                  1e-300);
    if (!(std::abs(weight) >= 1e-12 * scale)) {
        throw NumericalError("zero differential weight");
    }
    const AmplitudeRoute route = amplitude_route(T0, sd);
    const double weight_h = br(T1, dual0_h, flux0, true);

    RecursionResult out;
    out.control_weight = weight;
    out.z.assign(static_cast<std::size_t>(N) + 1, 0.0);
    out.flux.assign(static_cast<std::size_t>(N) + 1, Vector::Zero(dim));
    out.flux[0] = flux0;
    const auto zs = [&](int i) { return out.z[static_cast<std::size_t>(i)]; };
    const auto fx = [&](int i) -> const Vector& { return out.flux[static_cast<std::size_t>(i)]; };

    for (int n = 1; n <= N; ++n) {
        // z_n <T'> = -[sum_{p=1}^{n-1} z_{n-p} <T'>_{0p} + sum_{p=0}^{n-2} z_{n-1-p} <dT'>_{0p}
        //             + [n = 1] <dT> + [n >= 2] <dT>_{0,n-1}]
        double s = 0.0;
        double sh = 0.0;
        Vector rhs = Vector::Zero(dim);
        for (int p = 1; p <= n - 1; ++p) {
            s += zs(n - p) * br(T1, dual0, fx(p), false);
            sh += zs(n - p) * br(T1, dual0_h, fx(p), false);
            rhs -= zs(n - p) * (T1.L * fx(p));
        }
        for (int p = 0; p <= n - 2; ++p) {
            s += zs(n - 1 - p) * br(d1, dual0, fx(p), p == 0);
            sh += zs(n - 1 - p) * br(d1, dual0_h, fx(p), p == 0);
            rhs -= zs(n - 1 - p) * (d1.L * fx(p));
            if (p == 0) {
                rhs -= zs(n - 1) * d1.Q;
            }
        }
        s += br(d0, dual0, fx(n - 1), n == 1);
        sh += br(d0, dual0_h, fx(n - 1), n == 1);
        rhs -= d0.L * fx(n - 1);
        if (n == 1) {
            rhs -= d0.Q;
        }
        const double zn = -s / weight;
        out.z[static_cast<std::size_t>(n)] = zn;
        rhs -= zn * (T1.L * flux0 + T1.Q);
        const Vector harmonic = harmonic_solve(T0.L, sd, rhs);
        const double amplitude = route.amplitude(sh + zn * weight_h, rhs, sd);
        out.flux[static_cast<std::size_t>(n)] = amplitude * sd.phi + harmonic;
    }
    return out;
}

} // namespace detail

/// Same bundle as perturbation_series, through the recursion specialized to
/// linear control (both T'' and dT'' vanish).
inline SeriesBundle linear_control_series(const CombinedFamily& T2, const GaugeReference& R0, const BalancePoint& bp,
                                          const SpectralData& sd, int N) {
    if (!is_linear_control(T2)) {
        throw NumericalError("control not linear");
    }
    if (N < 0) {
        throw InputError("series order must be nonnegative");
    }
    const auto ex = detail::expand(T2, bp.z, 1, false);
    const auto direct = detail::run_linear_recursion(ex.T[0], ex.T[1], ex.dT[0], ex.dT[1], bp.fluxes.flux,
                                                     bp.fluxes.adjoint_flux, sd, N);
    const auto adjoint = detail::run_linear_recursion(ex.T[0].adjoint(), ex.T[1].adjoint(), ex.dT[0].adjoint(),
                                                      ex.dT[1].adjoint(), bp.fluxes.adjoint_flux, bp.fluxes.flux,
                                                      sd.adjoint(), N);
    SeriesBundle b{T2, R0, {}, {}, {}, direct.control_weight, sd, 0.0};
    b.z.coeffs = direct.z;
    b.z[0] = bp.z;
    b.flux.coeffs = direct.flux;
    b.adjoint_flux.coeffs = adjoint.flux;
    double zmax = 0.0;
    double diff = 0.0;
    for (int n = 1; n <= N; ++n) {
        zmax = std::max(zmax, std::abs(direct.z[static_cast<std::size_t>(n)]));
        diff = std::max(diff, std::abs(direct.z[static_cast<std::size_t>(n)] - adjoint.z[static_cast<std::size_t>(n)]));
    }
    b.adjoint_consistency = zmax > 0.0 ? diff / zmax : diff;
    return b;
}

/// Order-one results in closed form.
struct FirstOrder {
    double z1 = 0.0;
    Vector flux1;
};

inline FirstOrder first_order(const CombinedFamily& T2, const BalancePoint& bp, const SpectralData& sd) {
    const auto ex = detail::expand(T2, bp.z, 1, false);
    const Vector& phi0 = bp.fluxes.flux;
    const Vector& dual0 = bp.fluxes.adjoint_flux;
    const Vector dual0_h = project_harmonic_adjoint(dual0, sd);
    const ParamTriple& c1 = ex.T[1];
    const ParamTriple& d0 = ex.dT[0];
    const double w = detail::bracket_0p(c1, dual0, phi0, true);
    const double wh = detail::bracket_0p(c1, dual0_h, phi0, true);
    const double e = detail::bracket_0p(d0, dual0, phi0, true);
    const double eh = detail::bracket_0p(d0, dual0_h, phi0, true);
    FirstOrder fo;
    fo.z1 = -e / w;
    const double amplitude = -(eh - e * wh / w) / ex.T[0].Qdag.dot(sd.phi);
    const Vector b = -e / w * (c1.L * phi0 + c1.Q) + d0.L * phi0 + d0.Q;
    fo.flux1 = amplitude * sd.phi - harmonic_solve(ex.T[0].L, sd, b);
    return fo;
}

/// z_2 in closed form, from the order-one results.
inline double second_order_z(const CombinedFamily& T2, const BalancePoint& bp, const SpectralData& sd) {
    const FirstOrder fo = first_order(T2, bp, sd);
    const auto ex = detail::expand(T2, bp.z, 2, false);
    const Vector& phi0 = bp.fluxes.flux;
    const Vector& dual0 = bp.fluxes.adjoint_flux;
    const auto br = [&](const ParamTriple& X, const Vector& phi, bool zero) {
        return detail::bracket_0p(X, dual0, phi, zero);
    };
    const double w = br(ex.T[1], phi0, true);
    const double t2 = fo.z1 * fo.z1 * br(ex.T[2], phi0, true);
    return -(fo.z1 * (br(ex.dT[1], phi0, true) + br(ex.T[1], fo.flux1, false)) + t2 + br(ex.dT[0], fo.flux1, false)) /
           w;
}

enum class BracketOperator {
    Control,     ///< d/dz: brackets of T'
    Excitation,  ///< d/deps: brackets of dT
    Identity,    ///< T2 itself
};

/// <X>_{pq} = <Phi_dag_p, X.L Phi_q> + [p = 0] <X.Qdag, Phi_q> + [q = 0] <Phi_dag_p, X.Q>
/// for a fixed parameter direction X at the reference.
struct BracketTable {
    Matrix entries;

    double operator()(int p, int q) const { return entries(p, q); }
    int order() const { return static_cast<int>(entries.rows()) - 1; }
};

inline double bracket_pq(const ParamTriple& X, const SeriesBundle& b, int p, int q) {
    const Vector& dual = b.adjoint_flux[p];
    const Vector& phi = b.flux[q];
    double v = dual.dot(X.L * phi);
    if (p == 0) {
        v += X.Qdag.dot(phi);
    }
    if (q == 0) {
        v += dual.dot(X.Q);
    }
    return v;
}

namespace detail {

inline ParamTriple reference_direction(BracketOperator D, const SeriesBundle& b) {
    const double z0 = b.z[0];
    switch (D) {
    case BracketOperator::Control:
        return b.family.base().derivative()(z0);
    case BracketOperator::Excitation:
        return b.family.pert()(z0);
    case BracketOperator::Identity:
        return b.family.base()(z0);
    }
    return ParamTriple::zero(b.family.dim());
}

} // namespace detail

inline BracketTable bracket_table(BracketOperator D, const SeriesBundle& b, int N) {
    if (N > b.order() || N < 0) {
        throw NumericalError("order exceeded");
    }
    const ParamTriple X = detail::reference_direction(D, b);
    BracketTable t;
    t.entries.resize(N + 1, N + 1);
    for (int p = 0; p <= N; ++p) {
        for (int q = 0; q <= N; ++q) {
            t.entries(p, q) = bracket_pq(X, b, p, q);
        }
    }
    return t;
}

/// Coefficients <DT>_n = sum_{p1 + p2 + k = n} <G_k>_{p1 p2}, where G_k is
/// the eps^k coefficient of the D-derivative of T2 along the constrained path.
inline ScalarSeries bilinear_series(BracketOperator D, const SeriesBundle& b, int N) {
    if (N > b.order() || N < 0) {
        throw NumericalError("order exceeded");
    }
    const SystemParams* g = nullptr;
    const SystemParams* h = nullptr;
    const SystemParams control = b.family.base().derivative();
    const SystemParams pert_control = b.family.pert().derivative();
    switch (D) {
    case BracketOperator::Control:
        g = &control;
        h = &pert_control;
        break;
    case BracketOperator::Excitation:
        g = &b.family.pert();
        break;
    case BracketOperator::Identity:
        g = &b.family.base();
        h = &b.family.pert();
        break;
    }
    ScalarSeries zN;
    zN.coeffs.assign(b.z.coeffs.begin(), b.z.coeffs.begin() + N + 1);
    const auto G = compose(*g, zN);
    std::vector<ParamTriple> Gk(G.coeffs);
    if (h != nullptr) {
        const auto H = compose(*h, zN);
        for (int k = 1; k <= N; ++k) {
            Gk[static_cast<std::size_t>(k)] += H[k - 1];
        }
    }
    ScalarSeries out;
    out.coeffs.assign(static_cast<std::size_t>(N) + 1, 0.0);
    for (int n = 0; n <= N; ++n) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) {
            for (int p1 = 0; p1 <= n - k; ++p1) {
                s += bracket_pq(Gk[static_cast<std::size_t>(k)], b, p1, n - k - p1);
            }
        }
        out[n] = s;
    }
    return out;
}

/// Ratio-test estimate of the radius of convergence of a scalar series,
/// from the last coefficients that are not negligible. +inf when the series
/// terminates.
inline double radius_estimate(const ScalarSeries& s) {
    double scale = 0.0;
    for (int n = 1; n <= s.order(); ++n) {
        scale = std::max(scale, std::abs(s[n]));
    }
    if (scale == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    int last = -1;
    for (int n = s.order(); n >= 1; --n) {
        if (std::abs(s[n]) > 1e-13 * scale) {
            last = n;
            break;
        }
    }
    if (last < 2 || last < s.order() - 1) {
        return std::numeric_limits<double>::infinity();
    }
    return std::abs(s[last - 1] / s[last]);
}

} // namespace opweigh
