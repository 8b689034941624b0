#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "multigrad/experiment.hpp"
#include "multigrad/verify.hpp"

namespace {

using namespace multigrad;

std::string pick_out_dir(const std::string& cli_out, const ExperimentSpec& spec) {
    if (!cli_out.empty()) return cli_out;
    if (!spec.out_dir.empty()) return spec.out_dir;
    if (const char* env = std::getenv("MULTIGRAD_OUT"); env && *env) return env;
    return "out";
}

int do_run(const std::string& spec_path, const std::string& cli_out,
           std::size_t workers, std::uint64_t trials_override, bool has_override) {
    ExperimentSpec spec = parse_spec(spec_path);
    if (has_override) {
        if (trials_override == 0) {
            std::fprintf(stderr, "error: --trials-override must be >= 1\n");
            return 2;
        }
        spec.trials = static_cast<std::size_t>(trials_override);
    }
    std::string dir = pick_out_dir(cli_out, spec);

    ExperimentResult res = run_experiment(spec, workers);
    emit(res, dir);

    std::printf("problem: %s   steps: %zu   trials: %zu   seed: %llu\n",
                spec.problem.name.c_str(), spec.steps, spec.trials,
                static_cast<unsigned long long>(spec.seed));
    if (std::isfinite(res.oracle_loss))
        std::printf("oracle: x* = %s   L* = %s   (tol %s)\n",
                    format_double(res.oracle_x).c_str(),
                    format_double(res.oracle_loss).c_str(),
                    format_double(spec.oracle.tol).c_str());
    std::printf("%-20s %12s %12s %12s %10s %9s %12s\n", "method", "q1", "median",
                "q3", "oracle", "diverged", "wall_ms");
    bool ok = true;
    for (const SummaryRow& row : res.summaries) {
        if (row.failed) ok = false;
        std::printf("%-20s %12.6g %12.6g %12.6g %10.3f %9zu %12.2f\n",
                    row.method.c_str(), row.q1, row.median, row.q3,
                    row.oracle_frac, row.diverged, row.mean_wall_ms);
    }
    std::printf("wrote %s\n", dir.c_str());
    if (!ok) std::fprintf(stderr, "error: at least one method diverged on every trial\n");
    return ok ? 0 : 1;
}

int do_verify(const std::string& suite, std::uint64_t seed, std::size_t samples) {
    std::vector<SuiteResult> results;
    if (suite == "prop1" || suite == "all")
        results.push_back(run_prop1_suite(seed, samples));
    if (suite == "prop2" || suite == "all")
        results.push_back(run_prop2_suite(seed, samples));
    if (suite == "prop3" || suite == "all")
        results.push_back(run_prop3_suite(seed, samples));
    if (suite == "corollary" || suite == "all")
        results.push_back(run_corollary_suite(seed, samples));

    bool ok = true;
    for (const SuiteResult& r : results) {
        std::printf("[%s] %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str());
        for (std::size_t pos = 0; pos < r.detail.size();) {
            std::size_t end = r.detail.find('\n', pos);
            if (end == std::string::npos) end = r.detail.size();
            std::printf("    %.*s\n", static_cast<int>(end - pos), r.detail.data() + pos);
            pos = end + 1;
        }
        if (!r.passed) ok = false;
    }
    return ok ? 0 : 1;
}

int do_oracle(const std::string& problem, double lo, double hi, double step) {
    ProblemSpec ps;
    ps.name = problem;
    std::unique_ptr<Problem> p = make_problem(ps);
    if (p->dim() != 1) {
        std::fprintf(stderr, "error: oracle needs a one-dimensional problem\n");
        return 2;
    }
    GridSearchResult gs = grid_search_min(*p, lo, hi, step);
    std::printf("problem: %s\nx* = %s\nL* = %s\n", problem.c_str(),
                format_double(gs.x).c_str(), format_double(gs.loss).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-loss gradient combination toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    std::size_t workers = 0;
    std::uint64_t trials_override = 0;
    CLI::App* run_cmd = app.add_subcommand("run", "run an experiment spec");
    run_cmd->add_option("spec", spec_path, "experiment spec (JSON)")->required();
    run_cmd->add_option("--out", out_dir,
                        "output directory (default: spec out_dir, then $MULTIGRAD_OUT, then ./out)");
    run_cmd->add_option("--workers", workers, "worker threads; 0 = hardware count");
    CLI::Option* ov = run_cmd->add_option("--trials-override", trials_override,
                                          "run this many trials instead of the spec's");

    std::string suite = "all";
    std::size_t samples = 200000;
    std::uint64_t seed = 2024;
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "numerical verification suites");
    verify_cmd->add_option("--suite", suite, "prop1|prop2|prop3|corollary|all")
        ->check(CLI::IsMember({"prop1", "prop2", "prop3", "corollary", "all"}));
    verify_cmd->add_option("--samples", samples, "Monte Carlo samples per check");
    verify_cmd->add_option("--seed", seed, "verification seed");

    std::string oracle_problem;
    double lo = -10.0, hi = 10.0, step = 1e-4;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle", "grid-search the 1-D sum-loss minimum");
    oracle_cmd->add_option("problem", oracle_problem, "problem name (e.g. sines)")
        ->required();
    oracle_cmd->add_option("--lo", lo, "window lower bound");
    oracle_cmd->add_option("--hi", hi, "window upper bound");
    oracle_cmd->add_option("--step", step, "scan step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed())
            return do_run(spec_path, out_dir, workers, trials_override, ov->count() > 0);
        if (verify_cmd->parsed()) return do_verify(suite, seed, samples);
        if (oracle_cmd->parsed()) return do_oracle(oracle_problem, lo, hi, step);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
