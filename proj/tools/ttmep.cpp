#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "commands.hpp"

namespace {

using namespace ttmep;

void add_solver_flags(CLI::App& app, SolverConfig& c) {
    app.add_option("--b", c.block_size, "block size")->check(CLI::PositiveNumber);
    app.add_option("--sweeps", c.sweeps, "full sweeps")->check(CLI::NonNegativeNumber);
    app.add_option("--kick", c.kick, "kick rank")->check(CLI::NonNegativeNumber);
    app.add_option("--max-rank", c.max_rank, "TT rank cap (default b+1)");
    app.add_option("--eps", c.eps, "tuple residual tolerance");
    app.add_option("--eps1", c.eps1, "projected residual tolerance");
    app.add_option("--xi", c.xi, "duplicate threshold");
    app.add_option("--cos-threshold", c.cos_threshold, "Ritz matching cosine");
    app.add_option("--round-tol", c.round_tol, "rounding tolerance for the operators");
    app.add_flag_callback("--no-round", [&c] { c.round_delta = false; }, "keep the operators unrounded");
    app.add_option("--seed", c.seed, "random seed");
    app.add_option("--ritz-rule", c.ritz_rule, "positive-real or positive-imag")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, RitzRule>{{"positive-real", RitzRule::PositiveReal}, {"positive-imag", RitzRule::PositiveImag}}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-train solver for multiparameter eigenvalue problems"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 1;
    app.add_option("--threads", threads, "upper bound on worker threads")->check(CLI::PositiveNumber);

    cli::GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "write a random problem with known spectrum");
    g->add_option("--m", gen.m, "number of parameters")->required();
    g->add_option("--n", gen.n, "matrix size")->required();
    g->add_option("--seed", gen.seed, "random seed");
    g->add_option("--shift", gen.shift, "add this to every lambda_m");
    g->add_option("--out", gen.out, "problem JSON")->required();

    cli::SolveArgs sol;
    auto* s = app.add_subcommand("solve", "find tuples with lambda_m closest to a target");
    s->add_option("problem", sol.problem, "problem JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--target", sol.target, "target for lambda_m");
    add_solver_flags(*s, sol.config);
    s->add_option("--out", sol.out, "output prefix")->required();

    cli::OracleArgs ora;
    auto* o = app.add_subcommand("oracle", "exact tuples of a generated problem by enumeration");
    o->add_option("problem", ora.problem, "problem JSON with generator metadata")->required()->check(CLI::ExistingFile);
    o->add_option("--target", ora.target, "target for lambda_m");
    o->add_option("--count", ora.count, "tuples to keep")->check(CLI::PositiveNumber);
    o->add_option("--cap", ora.cap, "largest n^m to enumerate")->check(CLI::PositiveNumber);
    o->add_option("--out", ora.out, "CSV file")->required();

    cli::CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "match a solve report against oracle tuples");
    c->add_option("report", cmp.report, "report JSON")->required()->check(CLI::ExistingFile);
    c->add_option("oracle", cmp.oracle, "oracle CSV")->required()->check(CLI::ExistingFile);
    c->add_option("--tol", cmp.tol, "lambda_m match tolerance")->check(CLI::NonNegativeNumber);
    c->add_option("--wanted", cmp.wanted, "oracle rows counted as wanted")->check(CLI::PositiveNumber);
    c->add_option("--out", cmp.out, "per-row match CSV");

    cli::BenchArgs ben;
    ben.config.sweeps = 1;
    auto* b = app.add_subcommand("bench", "time the solver phases with and without rounding");
    b->add_option("--m", ben.ms, "parameter counts")->expected(1, -1);
    b->add_option("--n", ben.ns, "matrix sizes")->expected(1, -1);
    add_solver_flags(*b, ben.config);
    b->add_option("--out", ben.out, "timing CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kValidation;
    }
    Eigen::setNbThreads(threads);
    ben.seed = ben.config.seed;

    return cli::guarded([&] {
        if (*g) {
            cli::cmd_generate(gen);
        } else if (*s) {
            const auto r = cli::cmd_solve(sol);
            std::cout << r.tuples.size() << " tuples, " << r.sweeps_done << " sweeps (" << r.stop_reason << ")\n";
        } else if (*o) {
            cli::cmd_oracle(ora);
        } else if (*c) {
            std::cout << cli::cmd_compare(cmp).dump() << '\n';
        } else if (*b) {
            cli::cmd_bench(ben);
        }
    });
}
