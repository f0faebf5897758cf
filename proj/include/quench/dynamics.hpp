#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quench/hamiltonian.hpp"

namespace quench {

// Single-spin-flip rules. All three assign probability zero to moves that
// raise the energy by more than kZeroTol.
//   GlauberZeroT      Ising only: propose -S_x, accept with prob 1 / 1/2 / 0
//                     as delta H is negative / zero / positive
//   UniformMinimizer  uniform choice among the values minimizing delta H,
//                     the current value included
//   OccupationWeighted candidates are the moves with delta H <= kZeroTol, the
//                     current value included; a candidate is chosen with
//                     probability proportional to (occupation fraction + 1/|S0|)
enum class RuleKind { GlauberZeroT, UniformMinimizer, OccupationWeighted };

enum class EndReason { Absorbed, TMax, EventCap };

const char* to_string(RuleKind);
const char* to_string(EndReason);
RuleKind parse_rule(const std::string&);

struct FlipEvent {
    double t = 0.0;
    Site site = 0;
    std::int8_t old_value = 0;
    std::int8_t new_value = 0;
    double delta_h = 0.0;
    // filled by the Lyapunov audit; NaN = not audited
    double delta_l = std::numeric_limits<double>::quiet_NaN();
};

// Cumulative residence time per (site, spin value); drives OccupationWeighted
// and is reported for example-B style diagnostics.
class OccupationClock {
public:
    OccupationClock(Site n, int q) : q_(q) {
        cum_.assign(static_cast<std::size_t>(n) * q, 0.0);
        last_.assign(static_cast<std::size_t>(n), 0.0);
    }

    // settle residence of the current value up to time t
    void advance(Site x, int current_idx, double t) {
        cum_[static_cast<std::size_t>(x) * q_ + current_idx] += t - last_[static_cast<std::size_t>(x)];
        last_[static_cast<std::size_t>(x)] = t;
    }

    double fraction(Site x, int value_idx, int current_idx, double t) const {
        if (t <= 0.0) return 0.0;
        double r = cum_[static_cast<std::size_t>(x) * q_ + value_idx];
        if (value_idx == current_idx) r += t - last_[static_cast<std::size_t>(x)];
        return r / t;
    }

    double residence(Site x, int value_idx) const {
        return cum_[static_cast<std::size_t>(x) * q_ + value_idx];
    }

    void finalize(const SpinConfig& s, double t_end) {
        for (Site x = 0; x < static_cast<Site>(last_.size()); ++x)
            advance(x, s.space().index(s.spin(x)), t_end);
    }

private:
    int q_;
    std::vector<double> cum_;
    std::vector<double> last_;
};

struct Trajectory {
    SpinConfig initial;
    SpinConfig final;
    std::vector<FlipEvent> events;
    double end_time = 0.0;
    EndReason end_reason = EndReason::Absorbed;
    std::optional<OccupationClock> occupation; // only for OccupationWeighted runs
};

// i.i.d. product measure; weights align with the spin space's canonical value
// order and must sum to 1
SpinConfig init_config(const TorusLattice&, SpinSpace, std::span<const double> weights,
                       std::uint64_t seed);
// Ising shorthand, P(S_x = +1) = lambda
SpinConfig init_config_lambda(const TorusLattice&, double lambda, std::uint64_t seed);

struct RunParams {
    double t_max = 0.0;
    std::int64_t event_cap = 10'000'000;
    std::uint64_t seed = 0;
};

// Exact continuous-time simulation: every site carries a rate-1 Poisson
// update clock. Implemented as an exponential race over the set of active
// sites (sites with at least one selectable move), which is an exact thinning
// of the full process: rings at frozen sites cannot change the state, and a
// frozen site stays frozen until a spin in its neighborhood changes.
Trajectory run(const Potential&, RuleKind, const SpinConfig& s0, const RunParams&);

// a site is active iff some other value is selectable with positive
// probability; for all three rules this is min_{v != S_x} deltaH <= kZeroTol
bool is_site_active(const Potential&, Site x, const SpinConfig&);
bool is_absorbing(const Potential&, RuleKind, const SpinConfig&);

struct FlipStats {
    std::vector<double> eps;                          // as configured; 0 means "0+"
    std::vector<std::vector<std::int64_t>> per_site;  // [eps index][site]
    std::vector<std::int64_t> totals;                 // [eps index]
};

// N_x^t(eps): events at x with delta_h <= -eps; an entry eps = 0 counts
// strict drops (delta_h < -kZeroTol)
FlipStats flip_statistics(const Trajectory&, std::span<const double> eps);

// fraction of sites with at least one event in (a, b]
double flip_fraction_in_window(const Trajectory&, double a, double b);

enum class TypeLabel { FLike, ILike, MLike, Inconclusive };
const char* to_string(TypeLabel);

struct TypeReport {
    TypeLabel label = TypeLabel::Inconclusive;
    std::vector<double> window_fractions; // doubling windows, oldest to latest
    double overlap = 0.0;                 // Jaccard of last two windows' flip sets
};

// Desk-scale heuristic per the I/F/M phenomenology: windows are the doubling
// intervals (T/2^k, T/2^(k-1)]. Dying activity reads F-like; sustained
// activity reads M-like when the same sites keep flipping (high overlap) and
// I-like when the active set wanders.
TypeReport classify_type(std::span<const Trajectory>, double t_final, int n_windows = 4);

// label decision from window fractions (oldest..latest) and flip-set overlap;
// shared by classify_type and the report aggregation
TypeLabel label_from(std::span<const double> window_fractions, double overlap);

} // namespace quench
