#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"
#include "opweigh/spectral.hpp"

namespace opweigh {

struct Bracket {
    double lo = 0.0;
    double hi = 0.0;

    Bracket shifted(double by) const { return {lo - by, hi - by}; }
};

struct BalanceOptions {
    int scan_points = 64;
    int max_iterations = 200;
    /// Relative residual accepted on |R - R0| / |R0|.
    double residual_tol = 1e-12;
};

struct BalancePoint {
    double z = 0.0;
    double residual = 0.0;   ///< R(T(z)) - R0
    FluxPair fluxes;
    /// Present when L(z) has a usable fundamental eigenpair.
    std::optional<SpectralData> spectral;
};

namespace detail {

// Bracketed scalar root of f on [a, b] with f(a) f(b) <= 0, TOMS 748.
template <class F>
double refine_root(F&& f, double a, double b, double fa, double fb, int max_iterations) {
    if (fa == 0.0) {
        return a;
    }
    if (fb == 0.0) {
        return b;
    }
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iterations);
    const auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 1);
    const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    if (iters >= static_cast<std::uintmax_t>(max_iterations)) {
        throw NumericalError("root refinement did not converge");
    }
    // Pick the endpoint with the smaller residual.
    const double fl = f(r.first);
    const double fh = f(r.second);
    return std::abs(fl) <= std::abs(fh) ? r.first : r.second;
}

struct Probe {
    double z;
    double value;   // R - R0
    int det_sign;
};

inline Probe probe(const SystemParams& T, double R0, double z) {
    const ParamTriple t = T(z);
    Eigen::PartialPivLU<Matrix> lu(t.L);
    if (!(lu.rcond() > kSingularRcond)) {
        throw NumericalError("criticality inside bracket");
    }
    const double det = lu.determinant();
    const double R = t.Qdag.dot(-lu.solve(t.Q));
    return {z, R - R0, det > 0.0 ? 1 : -1};
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace detail

/// Solve R(T(z)) = R0 for z inside the bracket.
inline BalancePoint balance(const SystemParams& T, const GaugeReference& R0, Bracket br,
                            const BalanceOptions& opt = {}) {
    if (!(br.lo < br.hi) || !std::isfinite(br.lo) || !std::isfinite(br.hi)) {
        throw InputError("bracket must satisfy lo < hi");
    }
    if (opt.scan_points < 2) {
        throw InputError("balance scan needs at least two points");
    }
    const double r0 = R0.value();
    std::vector<detail::Probe> probes;
    probes.reserve(static_cast<std::size_t>(opt.scan_points));
    for (int i = 0; i < opt.scan_points; ++i) {
        const double z = i + 1 == opt.scan_points
                             ? br.hi
                             : br.lo + (br.hi - br.lo) * i / (opt.scan_points - 1);
        probes.push_back(detail::probe(T, r0, z));
    }

    int roots = 0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (i > 0 && probes[i].det_sign != probes[i - 1].det_sign) {
            throw NumericalError("criticality inside bracket");
        }
        const int s = detail::sign_of(probes[i].value);
        if (s == 0) {
            ++roots;
            at = i;
        } else if (i > 0) {
            const int sp = detail::sign_of(probes[i - 1].value);
            if (sp != 0 && sp != s) {
                ++roots;
                at = i;
            }
        }
    }
    if (roots == 0) {
        throw NumericalError("no sign change in bracket");
    }
    if (roots > 1) {
        throw NumericalError("non-unique root");
    }

    double z = probes[at].z;
    if (probes[at].value != 0.0) {
        const auto f = [&](double x) { return T.L()(x).partialPivLu().solve(T.Q()(x)).dot(-T.Qdag()(x)) - r0; };
        z = detail::refine_root(f, probes[at - 1].z, probes[at].z, probes[at - 1].value, probes[at].value,
                                opt.max_iterations);
    }

    BalancePoint bp;
    bp.z = z;
    const ParamTriple t = T(z);
    bp.fluxes = solve_fluxes(t);
    bp.residual = bp.fluxes.gauge - r0;
    if (!(std::abs(bp.residual) <= opt.residual_tol * std::abs(r0))) {
        throw NumericalError("balance residual above tolerance");
    }
    try {
        bp.spectral = fundamental_eigenpair(t.L);
        bp.fluxes.harmonicity = t.Qdag.dot(project_harmonic(bp.fluxes.flux, *bp.spectral)) / bp.fluxes.gauge;
    } catch (const NumericalError&) {
        bp.spectral.reset();
    }
    return bp;
}

/// f evaluated at the balancing value.
template <class F>
auto constrained_value(const F& f, const BalancePoint& bp) {
    return f(bp.z);
}

/// A constrained problem: a family in the control variable and the
/// reference value of its gauge output.
template <class Family>
struct Constrained {
    Family family;
    GaugeReference R0;
};

/// (T with alpha Q_dag, alpha R0). z and Phi at balance are unchanged.
template <class Family>
Constrained<Family> gauge_rescale(const Family& T, const GaugeReference& R0, double alpha) {
    if (alpha == 0.0 || !std::isfinite(alpha)) {
        throw NumericalError("zero gauge factor");
    }
    return {T.with_gauge_factor(alpha), GaugeReference(alpha * R0.value())};
}

/// Rescale so that the reference gauge output is 1.
template <class Family>
Constrained<Family> normalize_gauge(const Family& T, const GaugeReference& R0) {
    return gauge_rescale(T, R0, 1.0 / R0.value());
}

/// Combined family shifted so that its unexcited balance sits at z = 0.
struct ShiftedFamily {
    CombinedFamily family;
    Bracket bracket;
    double shift = 0.0;   ///< balancing value of the unshifted base family
};

inline ShiftedFamily shift_to_balance(const CombinedFamily& T2, const GaugeReference& R0, Bracket br,
                                      const BalanceOptions& opt = {}) {
    const BalancePoint bp = balance(T2.base(), R0, br, opt);
    return {T2.shifted(bp.z), br.shifted(bp.z), bp.z};
}

} // namespace opweigh
