#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quench/dynamics.hpp"
#include "quench/hamiltonian.hpp"

namespace quench {

inline constexpr std::int64_t kKBondBudget = 1 << 22;
inline constexpr std::int64_t kDefaultEnumCap = 1 << 20;

// Maximal influence of S_x on V_y over every context: brute-force maximum of
// |V_y(S_x = eta) - V_y(S_x = eta')| over all assignments of the other spins
// in the ball of y and all value pairs. Refuses when |S0|^(2d+1) local-energy
// evaluations per direction exceed eval_budget.
double k_bond(const Potential&, Site x, Site y, std::int64_t eval_budget = kKBondBudget);

struct BondWeights {
    std::vector<double> k_dir;  // [2*id] = K_{a,b}, [2*id+1] = K_{b,a}, (a,b) canonical
    std::vector<double> k_star; // per bond, max of the two directions
};

BondWeights k_star_field(const Potential&, std::int64_t eval_budget = kKBondBudget);

// nearest-rank empirical quantile of the K* values, q in [0,1]
double k_star_quantile(std::span<const double> k_star, double q);

// Connected components of the graph whose open bonds have K* > threshold.
// Cluster ids are dense and ordered by smallest member site; singletons are
// clusters too. The closure of a cluster adds every lattice neighbor.
struct ClusterPartition {
    double threshold = 0.0;
    std::vector<std::int32_t> cluster_of;
    std::vector<std::vector<Site>> members;  // sorted
    std::vector<std::vector<Site>> closures; // sorted
    std::size_t n_clusters() const { return members.size(); }
};

ClusterPartition open_clusters(const TorusLattice&, std::span<const double> k_star, double threshold);

// V_C = sum of local energies over the cluster's members, accumulated in a
// fixed (ascending-site) order so repeated evaluations are bit-identical.
double cluster_energy(const Potential&, std::span<const Site> members, const SpinConfig&);

// Capped strictly-increasing map from attainable cluster energies to Lyapunov
// values: sort the V_C values over all configurations of the closure, then
// accumulate increments min(gap, 4dK) starting from 0. Values closer than
// kZeroTol merge into one level, so levels stay > kZeroTol apart.
struct LyapunovTable {
    std::vector<double> levels;
    std::vector<double> lvalues;
    double cap = 0.0;               // 4dK
    std::int64_t config_count = 0;  // |S0|^|closure|

    double value(double v_c) const; // UsageError if v_c is not attainable
    double max_value() const { return lvalues.empty() ? 0.0 : lvalues.back(); }
    double bound() const {
        return cap * static_cast<double>(levels.empty() ? 0 : levels.size() - 1);
    }
};

// the capped cumulative map alone, from raw attainable values (any order)
LyapunovTable make_capped_table(std::vector<double> values, double cap);

LyapunovTable build_lyapunov(const Potential&, const ClusterPartition&, int cluster_id, double k,
                             std::int64_t enum_cap = kDefaultEnumCap);
std::vector<LyapunovTable> build_all_tables(const Potential&, const ClusterPartition&, double k,
                                            std::int64_t enum_cap = kDefaultEnumCap);

// L(S) = sum over clusters of the table value at V_C(S)
double eval_l(const Potential&, const ClusterPartition&, std::span<const LyapunovTable>,
              const SpinConfig&);

struct DecompositionReport {
    double sum_v_c = 0.0;
    double total_h = 0.0;
    double rel_err = 0.0;
    bool ok = false;
};

// sum_C V_C must reproduce the Hamiltonian (cluster decomposition)
DecompositionReport decomposition_check(const Potential&, const ClusterPartition&,
                                        const SpinConfig&);

struct AuditRecord {
    double delta_h = 0.0;
    double delta_l = 0.0;
    double delta_l_star = 0.0; // contribution of clusters with x in closure \ cluster
    double delta_v_home = 0.0;
    bool linear_regime = true; // |delta V_home| <= 4dK
    bool ok_star_bound = true;       // |delta_l_star| <= 2dK
    bool ok_linear_equality = true;  // linear regime => delta_l == delta_h
    bool ok_contract = true;         // delta_l <= delta_h, or <= -2dK past the cap
    bool ok_zero = true;             // zero-energy flip => zero Lyapunov change
    bool ok() const { return ok_star_bound && ok_linear_equality && ok_contract && ok_zero; }
};

// Audit one zero-temperature move S_x -> new_value against the per-flip
// contracts. Only the home cluster and the <= 2d clusters holding x in their
// closure are re-evaluated; the config is restored before returning.
AuditRecord audit_flip(const Potential&, const ClusterPartition&, std::span<const LyapunovTable>,
                       SpinConfig&, Site x, int new_value, double k);

struct AuditSummary {
    std::int64_t flips = 0;
    std::int64_t capped_flips = 0;
    std::int64_t violations_star = 0;
    std::int64_t violations_linear = 0;
    std::int64_t violations_contract = 0;
    std::int64_t violations_zero = 0;
    double l_initial = 0.0;
    double l_final = 0.0;
    double l_replay_err = 0.0; // |replayed L(final) - eval_l(final)|
    bool l_monotone = true;
    std::int64_t violations() const {
        return violations_star + violations_linear + violations_contract + violations_zero;
    }
};

// Replays the trajectory, audits every flip, and fills event.delta_l;
// per-flip records are appended to *records when given.
AuditSummary audit_trajectory(const Potential&, const ClusterPartition&,
                              std::span<const LyapunovTable>, Trajectory&, double k,
                              std::vector<AuditRecord>* records = nullptr);

struct ExpMomentReport {
    double alpha = 0.0;
    double log_mean = 0.0;
    double mean = 0.0;
    double max_term_share = 0.0;
    bool overflowed = false;
    bool stable = false;
    std::int64_t samples = 0;
};

// Empirical E[exp(alpha |C_origin|)] over independent partitions. Unstable
// when one sample dominates the sum (share > 1/2) or the mean overflows:
// both read as "K too small for the finite-moment condition".
ExpMomentReport exp_moment_diagnostic(std::span<const std::int64_t> origin_cluster_sizes,
                                      double alpha);
ExpMomentReport exp_moment_diagnostic(std::span<const ClusterPartition>, double alpha,
                                      Site origin = 0);

struct TailFit {
    double k = 0.0;
    std::vector<std::int64_t> exceed_counts; // [n-1] = #samples with |C| > n
    std::int64_t samples = 0;
    std::vector<std::int64_t> origin_sizes;  // |C_0| per realization
    double lambda_hat = 0.0;
    double log_m_hat = 0.0;
    bool fitted = false;
    double moment_threshold = 0.0; // (2d+1) ln |S0|, the rate the tail must beat
    bool spanning_warning = false; // some cluster wrapped a full side
};

// Monte Carlo estimate of P(|C_x| > n) per threshold K over fresh disorder
// realizations (every site serves as an origin), with a log-linear tail fit.
std::vector<TailFit> cluster_tail(const TorusLattice&, Potential::Kind, SpinSpace,
                                  const DisorderSpec&, std::span<const double> ks,
                                  int n_realizations, std::uint64_t seed);

} // namespace quench
