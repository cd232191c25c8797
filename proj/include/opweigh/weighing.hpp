#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "opweigh/constraint.hpp"
#include "opweigh/errors.hpp"
#include "opweigh/operator_model.hpp"
#include "opweigh/series.hpp"
#include "opweigh/spectral.hpp"

namespace opweigh {

struct DifferentialWeight {
    double bracket = 0.0;            ///< dR(T') at the reference
    double finite_difference = 0.0;  ///< centered difference of R o T
};

/// <T'> at a balanced reference, by the bracket formula and by a centered
/// finite difference of the unconstrained gauge output.
inline DifferentialWeight differential_weight(const SystemParams& T, const BalancePoint& bp, double tol = 1e-6) {
    DifferentialWeight w;
    w.bracket = gauge_differential(bp.fluxes, T.derivative()(bp.z));
    const double h = 1e-6 * std::max(1.0, std::abs(bp.z));
    w.finite_difference = (gauge_output(T(bp.z + h)) - gauge_output(T(bp.z - h))) / (2.0 * h);
    if (!(std::abs(w.bracket - w.finite_difference) <= tol * std::abs(w.bracket))) {
        throw NumericalError("observability mismatch");
    }
    return w;
}

/// Weight scale Z1(eps) = sum <dT>_n eps^(n+1) / (n+1).
struct WeightScale {
    ScalarSeries coeffs;   ///< <dT>_n
    /// max_n |<dT>_n - sum_{p1+p2=n} <dT>_{p1 p2}| when control is linear and
    /// remote with unexcited sources; NaN otherwise.
    double diagonal_discrepancy = std::numeric_limits<double>::quiet_NaN();

    int order() const { return coeffs.order(); }

    double operator()(double eps) const {
        double acc = 0.0;
        for (int n = order(); n >= 0; --n) {
            acc = acc * eps + coeffs[n] / (n + 1);
        }
        return acc * eps;
    }

    /// w1(eps) = Z1'(eps).
    double differential(double eps) const { return coeffs(eps); }
};

inline bool has_unexcited_sources(const CombinedFamily& T2) {
    return T2.pert().Q().is_zero() && T2.pert().Qdag().is_zero();
}

inline WeightScale weight_scale(const SeriesBundle& b, int N) {
    WeightScale ws;
    ws.coeffs = bilinear_series(BracketOperator::Excitation, b, N);
    if (is_linear_control(b.family) && is_remote(b.family) && has_unexcited_sources(b.family)) {
        const BracketTable t = bracket_table(BracketOperator::Excitation, b, N);
        double worst = 0.0;
        double scale = 0.0;
        for (int n = 0; n <= N; ++n) {
            double s = 0.0;
            for (int p = 0; p <= n; ++p) {
                s += t(p, n - p);
            }
            worst = std::max(worst, std::abs(s - ws.coeffs[n]));
            scale = std::max(scale, std::abs(ws.coeffs[n]));
        }
        ws.diagonal_discrepancy = worst;
        if (worst > 1e-10 * std::max(scale, 1.0)) {
            throw NumericalError("diagonal-sum identity violated");
        }
    }
    return ws;
}

struct QuadratureOptions {
    double tol = 1e-9;
    int max_halvings = 12;
};

namespace detail {

// Composite 16-point Gauss-Legendre rule on `panels` equal panels of [a, b].
template <class F>
double gauss16(F&& f, double a, double b, int panels) {
    using rule = boost::math::quadrature::gauss<double, 16>;
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double mid = a + (i + 0.5) * h;
        const double half = 0.5 * h;
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            s += w[j] * (f(mid - half * x[j]) + f(mid + half * x[j]));
        }
        total += s * half;
    }
    return total;
}

template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opt) {
    if (a == b) {
        return 0.0;
    }
    double prev = gauss16(f, a, b, 1);
    for (int k = 1; k <= opt.max_halvings; ++k) {
        const double cur = gauss16(f, a, b, 1 << k);
        if (std::abs(cur - prev) <= opt.tol * std::abs(cur)) {
            return cur;
        }
        prev = cur;
    }
    throw NumericalError("quadrature not converged");
}

} // namespace detail

/// Balancing value z(eps) of the excited problem.
inline BalancePoint balance_at(const CombinedFamily& T2, const GaugeReference& R0, double eps, Bracket br,
                               const BalanceOptions& opt = {}) {
    return balance(T2.at_excitation(eps), R0, br, opt);
}

/// Z2(z(eps)) - Z2(z(0)) = integral of d_z R(eps(z), z) along the constrained
/// path, where eps(z) inverts z(eps).
inline double weighing_integral(const CombinedFamily& T2, const GaugeReference& R0, Bracket br, double eps,
                                const QuadratureOptions& qopt = {}) {
    if (eps == 0.0) {
        return 0.0;
    }
    const double z0 = balance_at(T2, R0, 0.0, br).z;
    const double z1 = balance_at(T2, R0, eps, br).z;
    if (z0 == z1) {
        return 0.0;
    }

    // z(.) must be monotone on [0, eps] for eps(z) to exist
    constexpr int scan = 8;
    double last = z0;
    int direction = 0;
    for (int i = 1; i <= scan; ++i) {
        const double zi = i == scan ? z1 : balance_at(T2, R0, eps * i / scan, br).z;
        const int d = (zi > last) - (zi < last);
        if (d == 0 || (direction != 0 && d != direction)) {
            throw NumericalError("inverse function not resolvable");
        }
        direction = d;
        last = zi;
    }

    const double pad = 0.05 * std::abs(eps);
    const Bracket eps_bracket{std::min(0.0, eps) - pad, std::max(0.0, eps) + pad};
    BalanceOptions inner;
    inner.scan_points = 8;
    const auto integrand = [&](double z) {
        double e = 0.0;
        try {
            e = balance(T2.at_control(z), R0, eps_bracket, inner).z;
        } catch (const NumericalError& err) {
            if (std::string(err.what()) == "criticality inside bracket") {
                throw NumericalError("path crosses criticality");
            }
            throw NumericalError("inverse function not resolvable");
        }
        FluxPair fp;
        try {
            fp = solve_fluxes(T2(e, z));
        } catch (const NumericalError&) {
            throw NumericalError("path crosses criticality");
        }
        return gauge_differential(fp, T2.control_derivative(e, z));
    };
    return detail::integrate(integrand, z0, z1, qopt);
}

struct WeighingSample {
    double eps = 0.0;
    double z = 0.0;
    double R_residual = 0.0;
    double Z1_series = 0.0;
    double Z2_integral = 0.0;
    double balance_residual = 0.0;       ///< |Z1 + Delta Z2|
    double differential_residual = 0.0;  ///< |w1 + d_z R * dz/deps|
};

struct WeighingReport {
    std::vector<WeighingSample> samples;
    WeightScale scale;
    double radius = 0.0;   ///< ratio-test estimate from the z series
    double shift = 0.0;    ///< unexcited balancing value; sample z are in the original variable
};

/// Balance identity Z1 + Delta Z2 = 0 checked on a grid. The family is
/// normalized to R0 = 1 and shifted so that the unexcited balance is z = 0.
inline WeighingReport balance_check(const CombinedFamily& T2, const GaugeReference& R0, Bracket br,
                                    std::vector<double> eps_grid, int N, const QuadratureOptions& qopt = {}) {
    if (eps_grid.empty()) {
        throw InputError("empty eps grid");
    }
    std::sort(eps_grid.begin(), eps_grid.end());
    const auto norm = normalize_gauge(T2, R0);
    const ShiftedFamily sf = shift_to_balance(norm.family, norm.R0, br);
    const CombinedFamily& fam = sf.family;
    const GaugeReference& r0 = norm.R0;

    const BalancePoint ref = balance(fam.base(), r0, sf.bracket);
    const SpectralData sd = ref.spectral ? *ref.spectral : fundamental_eigenpair(fam.base()(ref.z).L);
    const SeriesBundle bundle = perturbation_series(fam, r0, ref, sd, N);

    WeighingReport rep;
    rep.scale = weight_scale(bundle, N);
    rep.radius = radius_estimate(bundle.z);
    rep.shift = sf.shift;
    for (double eps : eps_grid) {
        WeighingSample s;
        s.eps = eps;
        const BalancePoint bp = balance_at(fam, r0, eps, sf.bracket);
        s.z = bp.z + sf.shift;
        s.R_residual = bp.residual;
        s.Z1_series = rep.scale(eps);
        s.Z2_integral = weighing_integral(fam, r0, sf.bracket, eps, qopt);
        s.balance_residual = std::abs(s.Z1_series + s.Z2_integral);

        const double h = 1e-5 * std::max(1.0, std::abs(eps));
        const double dz = (balance_at(fam, r0, eps + h, sf.bracket).z - balance_at(fam, r0, eps - h, sf.bracket).z) /
                          (2.0 * h);
        const double d2R = gauge_differential(bp.fluxes, fam.control_derivative(eps, bp.z));
        s.differential_residual = std::abs(rep.scale.differential(eps) + d2R * dz);
        rep.samples.push_back(s);
    }
    return rep;
}

struct RecoveredCoefficients {
    std::vector<double> values;       ///< <dT>_0 .. <dT>_N
    std::vector<double> std_errors;   ///< NaN when the fit has no redundancy
    double condition = 0.0;
    bool scaled_basis = false;
};

/// Fit Z1 samples by a degree N+1 polynomial without constant term and read
/// off <dT>_n = (n+1) a_{n+1}. Samples at eps = 0 are dropped (Z1(0) = 0 is
/// built into the basis).
inline RecoveredCoefficients recover_coefficients(const std::vector<std::pair<double, double>>& samples, int N,
                                                  double condition_limit = 1e10) {
    if (N < 0) {
        throw InputError("series order must be nonnegative");
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : samples) {
        if (s.first != 0.0) {
            pts.push_back(s);
        }
    }
    const int k = N + 1;
    if (static_cast<int>(pts.size()) < k) {
        throw NumericalError("insufficient samples");
    }
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].first == pts[i - 1].first) {
            throw NumericalError("rank-deficient sample set");
        }
    }
    const auto m = static_cast<Eigen::Index>(pts.size());
    const auto design = [&](double t_scale) {
        Matrix A(m, k);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double t = pts[static_cast<std::size_t>(i)].first / t_scale;
            double pw = t;
            for (int j = 0; j < k; ++j) {
                A(i, j) = pw;
                pw *= t;
            }
        }
        return A;
    };
    const auto cond = [](const Matrix& A) {
        Eigen::JacobiSVD<Matrix> svd(A);
        const auto& s = svd.singularValues();
        return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
    };

    RecoveredCoefficients out;
    double t_scale = 1.0;
    Matrix A = design(1.0);
    out.condition = cond(A);
    if (out.condition > condition_limit) {
        t_scale = 0.0;
        for (const auto& p : pts) {
            t_scale = std::max(t_scale, std::abs(p.first));
        }
        A = design(t_scale);
        out.condition = cond(A);
        out.scaled_basis = true;
    }
    Vector y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        y(i) = pts[static_cast<std::size_t>(i)].second;
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    if (qr.rank() < k) {
        throw NumericalError("rank-deficient sample set");
    }
    const Vector a = qr.solve(y);

    double sigma2 = std::numeric_limits<double>::quiet_NaN();
    if (m > k) {
        sigma2 = (A * a - y).squaredNorm() / static_cast<double>(m - k);
    }
    const Matrix cov = (A.transpose() * A).inverse();
    out.values.resize(static_cast<std::size_t>(k));
    out.std_errors.resize(static_cast<std::size_t>(k));
    double unscale = 1.0;
    for (int j = 0; j < k; ++j) {
        unscale /= t_scale;
        out.values[static_cast<std::size_t>(j)] = (j + 1) * a(j) * unscale;
        out.std_errors[static_cast<std::size_t>(j)] = (j + 1) * std::sqrt(sigma2 * cov(j, j)) * std::abs(unscale);
    }
    return out;
}

/// Adds i.i.d. uniform noise on [-amplitude, amplitude] to the sample values.
inline std::vector<std::pair<double, double>> add_uniform_noise(std::vector<std::pair<double, double>> samples,
                                                                double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (auto& s : samples) {
        s.second += u(rng);
    }
    return samples;
}

struct RealizationPoint {
    double eps = 0.0;
    double z_ideal = 0.0;
    double z_real = 0.0;
    double Z2_ideal = 0.0;
    double Z2_real = 0.0;

    double z_discrepancy() const { return z_real - z_ideal; }
    double discrepancy() const { return Z2_real - Z2_ideal; }
};

/// Delta Z2 of two realizations of the same instrument, each gauge-normalized
/// and shifted to its own unexcited balance.
inline std::vector<RealizationPoint> realization_error(const CombinedFamily& ideal, const GaugeReference& R0_ideal,
                                                       const CombinedFamily& real, const GaugeReference& R0_real,
                                                       Bracket br, const std::vector<double>& eps_grid,
                                                       const QuadratureOptions& qopt = {}) {
    const auto prepare = [&](const CombinedFamily& f, const GaugeReference& r) {
        const auto n = normalize_gauge(f, r);
        return std::make_pair(shift_to_balance(n.family, n.R0, br), n.R0);
    };
    const auto [si, ri] = prepare(ideal, R0_ideal);
    const auto [sr, rr] = prepare(real, R0_real);
    std::vector<RealizationPoint> out;
    for (double eps : eps_grid) {
        RealizationPoint p;
        p.eps = eps;
        p.z_ideal = balance_at(si.family, ri, eps, si.bracket).z;
        p.z_real = balance_at(sr.family, rr, eps, sr.bracket).z;
        p.Z2_ideal = weighing_integral(si.family, ri, si.bracket, eps, qopt);
        p.Z2_real = weighing_integral(sr.family, rr, sr.bracket, eps, qopt);
        out.push_back(p);
    }
    return out;
}

} // namespace opweigh
