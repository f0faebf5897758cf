#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quench/dynamics.hpp"
#include "quench/percolyap.hpp"

namespace quench {

enum class RunMode { Simulate, Percolation, Audit, Classify };
const char* to_string(RunMode);

struct KPolicy {
    enum class Kind { Quantile, Value };
    Kind kind = Kind::Quantile;
    double param = 0.95;

    std::string to_text() const;
    static KPolicy parse(const std::string&);
};

// Flat key-value experiment description; `#` starts a comment, one key per
// line, dotted keys. See README for the key table. parse(to_text()) is
// lossless.
struct ExperimentConfig {
    std::vector<int> dims;
    SpinSpace space = SpinSpace::ising();
    DisorderSpec disorder;
    bool disorder_seed_fixed = false;
    RuleKind rule = RuleKind::GlauberZeroT;
    std::vector<double> init_weights; // aligned with the spin space value order
    double t_max = 100.0;
    std::int64_t event_cap = 10'000'000;
    std::vector<double> epsilons = {0.0};
    KPolicy k_policy;
    std::int64_t enum_cap = kDefaultEnumCap;
    int replicates = 1;
    std::uint64_t seed = 0;
    std::string out_dir;
    int trace_stride = 0; // extra trace rows every N events; 0 = endpoints only
    int tail_samples = 50;
    std::vector<double> tail_ks;
    int windows = 4;

    static ExperimentConfig parse(const std::string& text);
    std::string to_text() const;
    void validate() const;
};

struct ReplicateReport {
    int index = 0;
    EndReason end_reason = EndReason::Absorbed;
    double end_time = 0.0;
    std::int64_t events = 0;
    std::int64_t flipped_sites = 0;
    std::int64_t max_site_flips = 0;
    double h_initial = 0.0;
    double h_final = 0.0;
    double sum_delta_h = 0.0;
    double telescope_err = 0.0;
    double max_delta_h = 0.0;
    std::vector<std::int64_t> eps_totals;
    std::vector<double> window_fractions;
    double overlap = 0.0;
    bool counting_h_ok = true;
    bool counting_l_ok = true;
    // audit payload
    bool audited = false;
    double k_threshold = 0.0;
    std::int64_t clusters = 0;
    double l_initial = 0.0;
    double l_final = 0.0;
    std::int64_t audit_flips = 0;
    std::int64_t audit_violations = 0;
    std::int64_t capped_flips = 0;
    bool l_monotone = true;
    double decomposition_rel_err = 0.0;
};

struct ExperimentReport {
    RunMode mode = RunMode::Simulate;
    std::string config_text;
    std::vector<ReplicateReport> replicates;

    // aggregates, all recomputable from the replicate rows
    double absorbed_fraction = 0.0;
    double mean_events = 0.0;
    double mean_end_time = 0.0;
    std::vector<std::int64_t> eps_totals_sum;
    std::vector<double> mean_window_fractions;
    double mean_overlap = 0.0;
    TypeLabel label = TypeLabel::Inconclusive;
    std::int64_t counting_violations = 0;
    std::int64_t audit_violations = 0;

    // percolation-mode payload
    bool has_percolation = false;
    std::vector<TailFit> tail;
    std::vector<ExpMomentReport> exp_moments; // aligned with tail; samples<100 -> zeroed

    std::string to_json() const; // stable key order
};

// Runs the experiment described by the config: quenched disorder per
// replicate, trajectory, statistics, optional percolation/Lyapunov audit, and
// CSV/JSON emission under out_dir (nothing is written when out_dir is empty
// or replicates == 0). Bit-reproducible from (config, seed).
ExperimentReport run_experiment(const ExperimentConfig&, RunMode);

// recompute the aggregate block from replicate rows (aggregation idempotence)
void aggregate_report(ExperimentReport&);

} // namespace quench
