#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "banditlab/banditlab.hpp"

namespace {

void add_common_flags(CLI::App* cmd, banditlab::CliOptions& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--out", opts.out_path, "output CSV path (default: stdout)");
    cmd->add_option("--set", opts.sets, "config override key.path=value (repeatable)");
    cmd->add_option("--threads", opts.threads, "worker threads for repeated runs")
        ->envname("BANDITLAB_THREADS")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opts.seed, "override the experiment base seed");
    cmd->add_flag("--timing", opts.timing, "fill the wallclock_s column (breaks "
                                           "byte-identical reruns)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bandit multiclass and sparse contextual bandit simulator"};
    app.require_subcommand(1);

    banditlab::CliOptions opts;

    CLI::App* run = app.add_subcommand("run", "run one experiment, write a summary CSV");
    add_common_flags(run, opts);

    CLI::App* sweep = app.add_subcommand("sweep", "run a grid of experiments");
    add_common_flags(sweep, opts);

    CLI::App* oracle =
        app.add_subcommand("oracle-check", "compare the dual solver with the reference");
    add_common_flags(oracle, opts);
    oracle->add_option("--trials", opts.trials, "number of random instances")
        ->check(CLI::NonNegativeNumber);

    CLI::App* invariants =
        app.add_subcommand("invariants", "run the runtime invariant suite");
    add_common_flags(invariants, opts);

    CLI::App* bounds =
        app.add_subcommand("bound-table", "tabulate the theoretical regret bounds");
    add_common_flags(bounds, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; real parse errors are config errors.
        int code = app.exit(e);
        return code == 0 ? banditlab::kExitOk : banditlab::kExitConfig;
    }

    if (run->parsed()) return banditlab::cmd_run(opts);
    if (sweep->parsed()) return banditlab::cmd_sweep(opts);
    if (oracle->parsed()) return banditlab::cmd_oracle_check(opts);
    if (invariants->parsed()) return banditlab::cmd_invariants(opts);
    return banditlab::cmd_bound_table(opts);
}
