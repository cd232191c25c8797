#pragma once

#include <fmt/format.h>
#include <fmt/os.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "opweigh/opweigh.hpp"

namespace opweigh::cli {

struct RunConfig {
    std::vector<std::string> problems;
    int order = 8;
    std::string eps_grid = "0:0.5:6";
    std::optional<Bracket> bracket;
    double quad_tol = 1e-9;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
};

/// "lo,hi"
inline Bracket parse_bracket(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
        throw InputError("bracket must be given as lo,hi");
    }
    try {
        const double lo = std::stod(s.substr(0, comma));
        const double hi = std::stod(s.substr(comma + 1));
        if (!(lo < hi)) {
            throw InputError("bracket must satisfy lo < hi");
        }
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw InputError("bracket must be given as lo,hi");
    }
}

/// "a:b:n" -> n equispaced points from a to b inclusive.
inline std::vector<double> parse_grid(const std::string& s) {
    const auto c1 = s.find(':');
    const auto c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
    if (c2 == std::string::npos) {
        throw InputError("eps grid must be given as a:b:n");
    }
    double a = 0.0;
    double b = 0.0;
    long n = 0;
    try {
        a = std::stod(s.substr(0, c1));
        b = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
        n = std::stol(s.substr(c2 + 1));
    } catch (const std::logic_error&) {
        throw InputError("eps grid must be given as a:b:n");
    }
    if (n < 1) {
        throw InputError("eps grid needs at least one point");
    }
    std::vector<double> g;
    for (long i = 0; i < n; ++i) {
        g.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return g;
}

inline std::string num(double v) { return fmt::format("{:.17g}", v); }

inline void check_config(const RunConfig& cfg) {
    if (cfg.order < 0) {
        throw InputError("order must be nonnegative");
    }
    if (!(cfg.quad_tol > 0.0)) {
        throw InputError("quadrature tolerance must be positive");
    }
    if (!(cfg.noise >= 0.0)) {
        throw InputError("noise amplitude must be nonnegative");
    }
}

inline Problem load(const RunConfig& cfg) {
    if (cfg.problems.size() != 1) {
        throw InputError("exactly one problem file expected");
    }
    Problem p = load_problem(cfg.problems.front());
    if (cfg.bracket) {
        p.bracket = *cfg.bracket;
    }
    return p;
}

inline std::filesystem::path output_path(const RunConfig& cfg, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) {
        throw InputError("cannot create output directory '" + cfg.out_dir + "'");
    }
    return std::filesystem::path(cfg.out_dir) / name;
}

inline void run_solve(const RunConfig& cfg, std::ostream& os) {
    const Problem p = load(cfg);
    const SystemParams& T = p.family.base();
    const BalancePoint bp = balance(T, p.R0, p.bracket);
    const SpectralData sd = bp.spectral ? *bp.spectral : fundamental_eigenpair(T(bp.z).L);
    const ParamTriple t = T(bp.z);
    const CriticalityReport cr = criticality(t, sd);
    const DifferentialWeight w = differential_weight(T, bp);

    os << fmt::format("z_bal            {:.17g}\n", bp.z);
    os << fmt::format("R_residual       {:.3e}\n", bp.residual);
    os << fmt::format("gauge            {:.17g}\n", bp.fluxes.gauge);
    os << fmt::format("sigma            {:.17g}\n", sd.sigma);
    os << fmt::format("gap              {:.17g}\n", sd.gap);
    os << fmt::format("sigma/gap        {:.6e}\n", cr.separation_ratio);
    os << fmt::format("harmonicity      {:.17g}\n", cr.harmonicity);
    os << fmt::format("<phi_dag|Q>      {:.17g}\n", cr.source_coupling);
    os << fmt::format("<Q_dag|phi>      {:.17g}\n", cr.gauge_coupling);
    os << fmt::format("det L            {:.17g}\n", cr.determinant);
    os << fmt::format("weight (bracket) {:.17g}\n", w.bracket);
    os << fmt::format("weight (fd)      {:.17g}\n", w.finite_difference);
    os << "flux            ";
    for (Eigen::Index i = 0; i < bp.fluxes.flux.size(); ++i) {
        os << ' ' << num(bp.fluxes.flux(i));
    }
    os << "\nadjoint_flux    ";
    for (Eigen::Index i = 0; i < bp.fluxes.adjoint_flux.size(); ++i) {
        os << ' ' << num(bp.fluxes.adjoint_flux(i));
    }
    os << '\n';
}

inline void run_series(const RunConfig& cfg, std::ostream& os) {
    const Problem p = load(cfg);
    const SeriesBundle b = perturbation_series(p.family, p.R0, p.bracket, cfg.order);
    const auto dim = p.family.dim();
    const auto path = output_path(cfg, "series.csv");
    auto out = fmt::output_file(path.string());
    std::string header = "n,z_n";
    for (Eigen::Index i = 0; i < dim; ++i) {
        header += fmt::format(",flux_{}", i);
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
        header += fmt::format(",adjoint_{}", i);
    }
    out.print("{}\n", header);
    for (int n = 0; n <= b.order(); ++n) {
        std::string row = fmt::format("{},{}", n, num(b.z[n]));
        for (Eigen::Index i = 0; i < dim; ++i) {
            row += "," + num(b.flux[n](i));
        }
        for (Eigen::Index i = 0; i < dim; ++i) {
            row += "," + num(b.adjoint_flux[n](i));
        }
        out.print("{}\n", row);
    }
    out.close();
    os << fmt::format("wrote {} (order {}, radius estimate {:.6g}, adjoint consistency {:.3e})\n", path.string(),
                      b.order(), radius_estimate(b.z), b.adjoint_consistency);
}

inline void run_weigh(const RunConfig& cfg, std::ostream& os) {
    const Problem p = load(cfg);
    const std::vector<double> grid = parse_grid(cfg.eps_grid);
    const WeighingReport rep = balance_check(p.family, p.R0, p.bracket, grid, cfg.order, {cfg.quad_tol});

    {
        auto out = fmt::output_file(output_path(cfg, "weighing_report.csv").string());
        out.print("eps,z_bal,Z1_series,Z2_integral,balance_residual\n");
        for (const auto& s : rep.samples) {
            out.print("{},{},{},{},{}\n", num(s.eps), num(s.z), num(s.Z1_series), num(s.Z2_integral),
                      num(s.balance_residual));
        }
    }

    // Z1 measured through the observables: Z1 = -Delta Z2.
    std::vector<std::pair<double, double>> samples;
    for (const auto& s : rep.samples) {
        samples.emplace_back(s.eps, -s.Z2_integral);
    }
    if (cfg.noise > 0.0) {
        samples = add_uniform_noise(samples, cfg.noise, cfg.seed);
    }
    int usable = 0;
    for (const auto& s : samples) {
        usable += s.first != 0.0 ? 1 : 0;
    }
    const int n_rec = std::min(cfg.order, usable - 1);
    std::optional<RecoveredCoefficients> rec;
    if (n_rec >= 0) {
        rec = recover_coefficients(samples, n_rec);
    }
    {
        auto out = fmt::output_file(output_path(cfg, "coefficients.csv").string());
        out.print("n,series_value,recovered_value,abs_error\n");
        for (int n = 0; n <= rep.scale.order(); ++n) {
            const double sv = rep.scale.coeffs[n];
            if (rec && n <= n_rec) {
                const double rv = rec->values[static_cast<std::size_t>(n)];
                out.print("{},{},{},{}\n", n, num(sv), num(rv), num(std::abs(rv - sv)));
            } else {
                out.print("{},{},,\n", n, num(sv));
            }
        }
    }
    double worst = 0.0;
    for (const auto& s : rep.samples) {
        worst = std::max(worst, s.balance_residual);
    }
    os << fmt::format("wrote weighing_report.csv and coefficients.csv to {}\n", cfg.out_dir);
    os << fmt::format("max balance residual {:.3e}; radius estimate {:.6g}", worst, rep.radius);
    if (rec) {
        os << fmt::format("; recovered {} coefficients (condition {:.3e}{})", n_rec + 1, rec->condition,
                          rec->scaled_basis ? ", scaled basis" : "");
    }
    os << '\n';
}

} // namespace opweigh::cli
