#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "quench/harness.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw quench::UsageError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct SubArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    bool out_set = false;
};

void add_common(CLI::App* sub, SubArgs& args) {
    sub->add_option("config", args.config_path, "experiment config file")->required();
    sub->add_option("--seed", args.seed, "override the master seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_option("--out", args.out, "override the output directory")
        ->each([&args](const std::string&) { args.out_set = true; });
}

int run_mode(const SubArgs& args, quench::RunMode mode) {
    quench::ExperimentConfig cfg = quench::ExperimentConfig::parse(slurp(args.config_path));
    if (args.seed_set) cfg.seed = args.seed;
    if (args.out_set) cfg.out_dir = args.out;

    const quench::ExperimentReport rep = quench::run_experiment(cfg, mode);

    std::printf("%s: %zu replicate(s)\n", quench::to_string(mode), rep.replicates.size());
    if (!rep.replicates.empty()) {
        std::printf("  absorbed fraction: %.3f   mean events: %.1f   label: %s\n",
                    rep.absorbed_fraction, rep.mean_events, quench::to_string(rep.label));
        std::printf("  counting violations: %lld   audit violations: %lld\n",
                    static_cast<long long>(rep.counting_violations),
                    static_cast<long long>(rep.audit_violations));
    }
    for (std::size_t i = 0; i < rep.tail.size(); ++i) {
        const auto& f = rep.tail[i];
        std::printf("  K=%-8g lambda_hat=%-10g fitted=%d span_warn=%d", f.k, f.lambda_hat,
                    f.fitted ? 1 : 0, f.spanning_warning ? 1 : 0);
        if (i < rep.exp_moments.size() && rep.exp_moments[i].samples > 0)
            std::printf("  exp_moment(stable=%d, share=%.3f)", rep.exp_moments[i].stable ? 1 : 0,
                        rep.exp_moments[i].max_term_share);
        std::printf("\n");
    }
    if (!cfg.out_dir.empty() && !rep.replicates.empty())
        std::printf("  wrote %s/\n", cfg.out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-driven zero-temperature spin dynamics with a percolation Lyapunov audit"};
    app.require_subcommand(1);

    SubArgs sim, perc, audit, cls;
    add_common(app.add_subcommand("simulate", "run trajectories and statistics"), sim);
    add_common(app.add_subcommand("percolation", "K* field, clusters and tail fit"), perc);
    add_common(app.add_subcommand("lyapunov-audit", "trajectory with per-flip Lyapunov audit"),
               audit);
    add_common(app.add_subcommand("classify", "I/F/M type heuristic over replicates"), cls);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints help itself; usage problems exit 1
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("simulate")) return run_mode(sim, quench::RunMode::Simulate);
        if (app.got_subcommand("percolation")) return run_mode(perc, quench::RunMode::Percolation);
        if (app.got_subcommand("lyapunov-audit")) return run_mode(audit, quench::RunMode::Audit);
        if (app.got_subcommand("classify")) return run_mode(cls, quench::RunMode::Classify);
    } catch (const quench::Refusal& e) {
        std::fprintf(stderr, "refused: %s\n", e.what());
        return 2;
    } catch (const quench::UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
