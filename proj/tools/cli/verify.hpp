#pragma once

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cli/run.hpp"
#include "opweigh/opweigh.hpp"

namespace opweigh::cli {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline CheckResult guarded(const std::string& name, const std::function<CheckResult()>& body) {
    try {
        CheckResult r = body();
        r.name = name;
        return r;
    } catch (const std::exception& e) {
        return {name, false, e.what()};
    }
}

inline CheckResult within(double err, double tol) {
    return {"", err <= tol, fmt::format("err {:.2e} (tol {:.0e})", err, tol)};
}

inline Matrix random_2x2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix M(2, 2);
    M << u(rng), u(rng), u(rng), u(rng);
    return M;
}

inline CombinedFamily worked_2d() {
    Matrix B(2, 2);
    B << 1, 1, 0, 0;
    Matrix C(2, 2);
    C << 0, 0, 1, 1;
    Vector Q(2);
    Q << 1, 0;
    Vector Qd(2);
    Qd << 2, 1;
    return twoD_family(B, C, Q, Qd);
}

} // namespace detail

/// Oracle checks that need no input files.
inline std::vector<CheckResult> builtin_checks() {
    std::vector<CheckResult> out;

    out.push_back(detail::guarded("comatrix/codeterminant identities", [] {
        std::mt19937_64 rng(7);
        Matrix A0(2, 2);
        A0 << 0, 0, 0, -1;
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const Matrix A = detail::random_2x2(rng);
            const Matrix B = detail::random_2x2(rng);
            const Matrix C = detail::random_2x2(rng);
            const Matrix I = Matrix::Identity(2, 2);
            worst = std::max(worst, (comatrix(A) * A - A.determinant() * I).norm());
            worst = std::max(worst, std::abs(codeterminant(A, A) - 2 * A.determinant()));
            worst = std::max(worst, (comatrix(A) * C * comatrix(A) -
                                     (codeterminant(C, A) * comatrix(A) - A.determinant() * comatrix(C)))
                                        .norm());
            worst = std::max(worst, (comatrix(A0) * C * comatrix(B) + comatrix(B) * C * comatrix(A0) -
                                     (codeterminant(C, B) * comatrix(A0) + B(0, 0) * comatrix(C) - C(0, 0) * comatrix(B)))
                                        .norm());
        }
        return detail::within(worst, 1e-12);
    }));

    out.push_back(detail::guarded("1D oracle vs pipeline", [] {
        const CombinedFamily f = oneD_family(2, 1, 3, 1);
        const GaugeReference R0(1.0);
        const Bracket br{-1.0, 0.9};
        const SeriesBundle b = perturbation_series(f, R0, br, 4);
        const WeightScale ws = weight_scale(b, 4);
        double worst = 0.0;
        for (double eps : {-0.5, 0.0, 0.6, 1.0}) {
            const OneDResult o = oneD_oracle(2, 1, 3, 1, eps);
            worst = std::max(worst, std::abs(balance_at(f, R0, eps, br).z - o.z));
            worst = std::max(worst, std::abs(ws(eps) - o.Z1));
            worst = std::max(worst, std::abs(weighing_integral(f, R0, br, eps) - o.delta_Z2));
        }
        return detail::within(worst, 1e-10);
    }));

    out.push_back(detail::guarded("2D oracle constants", [] {
        Matrix B(2, 2);
        B << 1, 1, 0, 0;
        Matrix C(2, 2);
        C << 0, 0, 1, 1;
        Vector Q(2);
        Q << 1, 0;
        Vector Qd(2);
        Qd << 2, 1;
        const TwoDResult o = twoD_oracle(B, C, Q, Qd, 0.0);
        const auto& k = o.constants;
        double err = std::abs(k.alpha1 + 2) + std::abs(k.alpha2 - 1) + std::abs(k.alpha3 + 0.5) +
                     std::abs(k.alpha4 - 0.5) + std::abs(k.delta_T0 + 0.5);
        err += std::abs(k.alpha1 * k.alpha4 + k.alpha2 + o.c11 / o.b11);
        return detail::within(err, 1e-12);
    }));

    out.push_back(detail::guarded("2D pipeline vs oracle", [] {
        Matrix B(2, 2);
        B << 1, 1, 0, 0;
        Matrix C(2, 2);
        C << 0, 0, 1, 1;
        Vector Q(2);
        Q << 1, 0;
        Vector Qd(2);
        Qd << 2, 1;
        const int N = 8;
        const TwoDResult o = twoD_oracle(B, C, Q, Qd, 0.0, N);
        const GaugeReference R0(1.0);
        const ShiftedFamily sf = shift_to_balance(detail::worked_2d(), R0, {-3.0, -0.5});
        const SeriesBundle b = perturbation_series(sf.family, R0, sf.bracket, N);
        const WeightScale ws = weight_scale(b, N);
        double worst = std::abs(sf.shift - o.constants.alpha1);
        worst = std::max(worst, std::abs(b.z[1] - o.constants.alpha2));
        for (int n = 0; n <= N; ++n) {
            worst = std::max(worst, std::abs(ws.coeffs[n] - o.weight_coeffs[static_cast<std::size_t>(n)]));
            worst = std::max(worst, (b.flux[n] - o.flux[static_cast<std::size_t>(n)]).norm());
            worst = std::max(worst, (b.adjoint_flux[n] - o.adjoint_flux[static_cast<std::size_t>(n)]).norm());
        }
        return detail::within(worst, 1e-10);
    }));

    out.push_back(detail::guarded("2D balance identity", [] {
        const WeighingReport rep =
            balance_check(detail::worked_2d(), GaugeReference(1.0), {-3.0, -0.5}, {0.2, 0.5, 1.0}, 24);
        double worst = 0.0;
        for (const auto& s : rep.samples) {
            worst = std::max(worst, s.balance_residual);
        }
        return detail::within(worst, 1e-7);
    }));
    return out;
}

/// Consistency checks on one problem file.
inline std::vector<CheckResult> problem_checks(const std::string& path, const std::optional<Bracket>& bracket) {
    std::vector<CheckResult> out;
    const auto name = std::filesystem::path(path).filename().string();
    std::optional<Problem> loaded;
    try {
        loaded = load_problem(path);
        if (bracket) {
            loaded->bracket = *bracket;
        }
    } catch (const std::exception& e) {
        out.push_back({name + ": load", false, e.what()});
        return out;
    }
    const Problem& p = *loaded;

    out.push_back(detail::guarded(name + ": observability", [&] {
        const BalancePoint bp = balance(p.family.base(), p.R0, p.bracket);
        const DifferentialWeight w = differential_weight(p.family.base(), bp);
        return detail::within(std::abs(w.bracket - w.finite_difference) / std::abs(w.bracket), 1e-6);
    }));

    out.push_back(detail::guarded(name + ": closed forms (order 1, 2)", [&] {
        const BalancePoint bp = balance(p.family.base(), p.R0, p.bracket);
        const SpectralData sd = bp.spectral ? *bp.spectral : fundamental_eigenpair(p.family.base()(bp.z).L);
        const SeriesBundle b = perturbation_series(p.family, p.R0, bp, sd, 2);
        const FirstOrder fo = first_order(p.family, bp, sd);
        const double z2 = second_order_z(p.family, bp, sd);
        const double s = std::max({std::abs(b.z[1]), std::abs(b.z[2]), 1e-300});
        double err = std::max(std::abs(b.z[1] - fo.z1), std::abs(b.z[2] - z2)) / s;
        err = std::max(err, (b.flux[1] - fo.flux1).norm() / std::max(fo.flux1.norm(), 1e-300));
        if (fo.flux1.norm() == 0.0) {
            err = std::max(err, b.flux[1].norm());
        }
        return detail::within(err, 1e-10);
    }));

    out.push_back(detail::guarded(name + ": direct/adjoint z series agree", [&] {
        const SeriesBundle b = perturbation_series(p.family, p.R0, p.bracket, 8);
        return detail::within(b.adjoint_consistency, 1e-10);
    }));

    out.push_back(detail::guarded(name + ": balance identity at small eps", [&] {
        const SeriesBundle b = perturbation_series(p.family, p.R0, p.bracket, 16);
        const double radius = radius_estimate(b.z);
        const double eps = std::min(0.1, 0.1 * radius);
        const WeighingReport rep = balance_check(p.family, p.R0, p.bracket, {eps}, 16);
        return detail::within(rep.samples.front().balance_residual, 1e-8);
    }));
    return out;
}

inline int run_verify(const RunConfig& cfg, std::ostream& os) {
    std::vector<CheckResult> all = builtin_checks();
    for (const auto& path : cfg.problems) {
        const auto more = problem_checks(path, cfg.bracket);
        all.insert(all.end(), more.begin(), more.end());
    }
    std::size_t width = 5;
    for (const auto& r : all) {
        width = std::max(width, r.name.size());
    }
    int failed = 0;
    for (const auto& r : all) {
        os << fmt::format("{:<{}}  {}  {}\n", r.name, width, r.pass ? "PASS" : "FAIL", r.detail);
        failed += r.pass ? 0 : 1;
    }
    os << fmt::format("{} checks, {} failed\n", all.size(), failed);
    return failed == 0 ? 0 : 1;
}

} // namespace opweigh::cli
