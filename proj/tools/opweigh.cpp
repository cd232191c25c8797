#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "cli/run.hpp"
#include "cli/verify.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

} // namespace

int main(int argc, char** argv) {
    using namespace opweigh;

    CLI::App app{"Perturbation series and weighing for constrained linear source problems"};
    app.require_subcommand(1);

    cli::RunConfig cfg;
    std::string bracket;

    const auto add_bracket = [&](CLI::App* sub) {
        sub->add_option("--bracket", bracket, "control bracket lo,hi (overrides the problem file)");
    };

    auto* solve = app.add_subcommand("solve", "balance the reference problem and print its spectral report");
    solve->add_option("problem", cfg.problems, "problem file")->required()->expected(1);
    add_bracket(solve);

    auto* series = app.add_subcommand("series", "write perturbation series coefficients to series.csv");
    series->add_option("problem", cfg.problems, "problem file")->required()->expected(1);
    series->add_option("--order", cfg.order, "truncation order")->capture_default_str();
    series->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    add_bracket(series);

    auto* weigh = app.add_subcommand("weigh", "balance identity and coefficient recovery on an eps grid");
    weigh->add_option("problem", cfg.problems, "problem file")->required()->expected(1);
    weigh->add_option("--order", cfg.order, "truncation order")->capture_default_str();
    weigh->add_option("--eps-grid", cfg.eps_grid, "a:b:n, n points from a to b")->capture_default_str();
    weigh->add_option("--quad-tol", cfg.quad_tol, "relative quadrature tolerance")->capture_default_str();
    weigh->add_option("--noise", cfg.noise, "uniform noise amplitude on measured weight samples")
        ->capture_default_str();
    weigh->add_option("--seed", cfg.seed, "noise seed")->capture_default_str();
    weigh->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    add_bracket(weigh);

    auto* verify = app.add_subcommand("verify", "run the oracle suite, plus consistency checks on problem files");
    verify->add_option("problems", cfg.problems, "problem files");
    add_bracket(verify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (!bracket.empty()) {
            cfg.bracket = cli::parse_bracket(bracket);
        }
        cli::check_config(cfg);
        if (solve->parsed()) {
            cli::run_solve(cfg, std::cout);
        } else if (series->parsed()) {
            cli::run_series(cfg, std::cout);
        } else if (weigh->parsed()) {
            cli::run_weigh(cfg, std::cout);
        } else if (verify->parsed()) {
            return cli::run_verify(cfg, std::cout);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::system_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return 0;
}
