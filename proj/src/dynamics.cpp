#include "quench/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "quench/rng.hpp"

namespace quench {

const char* to_string(RuleKind r) {
    switch (r) {
        case RuleKind::GlauberZeroT: return "glauber";
        case RuleKind::UniformMinimizer: return "uniform_min";
        case RuleKind::OccupationWeighted: return "occupation";
    }
    return "?";
}

const char* to_string(EndReason e) {
    switch (e) {
        case EndReason::Absorbed: return "absorbed";
        case EndReason::TMax: return "t_max";
        case EndReason::EventCap: return "event_cap";
    }
    return "?";
}

const char* to_string(TypeLabel l) {
    switch (l) {
        case TypeLabel::FLike: return "F-like";
        case TypeLabel::ILike: return "I-like";
        case TypeLabel::MLike: return "M-like";
        case TypeLabel::Inconclusive: return "inconclusive";
    }
    return "?";
}

RuleKind parse_rule(const std::string& s) {
    if (s == "glauber") return RuleKind::GlauberZeroT;
    if (s == "uniform_min") return RuleKind::UniformMinimizer;
    if (s == "occupation") return RuleKind::OccupationWeighted;
    throw UsageError("rule: unknown flip rule '" + s + "'");
}

SpinConfig init_config(const TorusLattice& lat, SpinSpace space, std::span<const double> weights,
                       std::uint64_t seed) {
    if (static_cast<int>(weights.size()) != space.size())
        throw UsageError("init: weight vector size must equal |S0|");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw UsageError("init: weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw UsageError("init: weights must sum to 1");

    SpinConfig s(lat, space, space.value(0));
    for (Site x = 0; x < lat.n_sites(); ++x) {
        Rng rng(seed, Stream::InitConfig, static_cast<std::uint64_t>(x));
        const double u = rng.u01();
        double acc = 0.0;
        int idx = space.size() - 1;
        for (int i = 0; i < space.size(); ++i) {
            acc += weights[static_cast<std::size_t>(i)];
            if (u < acc) {
                idx = i;
                break;
            }
        }
        s.set(x, space.value(idx));
    }
    return s;
}

SpinConfig init_config_lambda(const TorusLattice& lat, double lambda, std::uint64_t seed) {
    if (lambda < 0.0 || lambda > 1.0) throw UsageError("init: lambda must be in [0,1]");
    const double w[2] = {1.0 - lambda, lambda}; // value order {-1, +1}
    return init_config(lat, SpinSpace::ising(), w, seed);
}

bool is_site_active(const Potential& pot, Site x, const SpinConfig& s) {
    const SpinSpace& space = pot.space();
    const int cur = s.spin(x);
    for (int i = 0; i < space.size(); ++i) {
        const int v = space.value(i);
        if (v == cur) continue;
        if (pot.delta(x, s, v) <= kZeroTol) return true;
    }
    return false;
}

bool is_absorbing(const Potential& pot, RuleKind, const SpinConfig& s) {
    for (Site x = 0; x < s.n(); ++x)
        if (is_site_active(pot, x, s)) return false;
    return true;
}

namespace {

// chosen new value and its energy delta; new == old means "no change"
struct Move {
    int value;
    double delta;
};

Move select_move(const Potential& pot, RuleKind rule, Site x, const SpinConfig& s,
                 const OccupationClock* occ, double t, Rng& rng) {
    const SpinSpace& space = pot.space();
    const int cur = s.spin(x);

    if (rule == RuleKind::GlauberZeroT) {
        const int prop = -cur;
        const double d = pot.delta(x, s, prop);
        if (d < -kZeroTol) return {prop, d};
        if (d <= kZeroTol) return rng.u01() < 0.5 ? Move{prop, d} : Move{cur, 0.0};
        return {cur, 0.0};
    }

    // deltas over the whole spin space (delta(cur) = 0)
    double deltas[16];
    const int q = space.size();
    double dmin = 0.0;
    for (int i = 0; i < q; ++i) {
        const int v = space.value(i);
        deltas[i] = (v == cur) ? 0.0 : pot.delta(x, s, v);
        if (deltas[i] < dmin) dmin = deltas[i];
    }

    if (rule == RuleKind::UniformMinimizer) {
        int cands[16];
        int n_c = 0;
        for (int i = 0; i < q; ++i)
            if (deltas[i] <= dmin + kZeroTol) cands[n_c++] = i;
        const int pick = cands[rng.below(static_cast<std::uint64_t>(n_c))];
        const int v = space.value(pick);
        return {v, v == cur ? 0.0 : deltas[pick]};
    }

    // OccupationWeighted: non-increasing moves, weight = fraction + 1/|S0|
    const int cur_idx = space.index(cur);
    double w[16];
    double wsum = 0.0;
    for (int i = 0; i < q; ++i) {
        if (deltas[i] <= kZeroTol) {
            w[i] = occ->fraction(x, i, cur_idx, t) + 1.0 / q;
        } else {
            w[i] = 0.0;
        }
        wsum += w[i];
    }
    double u = rng.u01() * wsum;
    int pick = cur_idx;
    for (int i = 0; i < q; ++i) {
        if (w[i] <= 0.0) continue;
        if (u < w[i]) {
            pick = i;
            break;
        }
        u -= w[i];
    }
    const int v = space.value(pick);
    return {v, v == cur ? 0.0 : deltas[pick]};
}

// active set with O(1) membership updates
struct ActiveSet {
    std::vector<Site> list;
    std::vector<std::int64_t> pos; // -1 when inactive

    void init(const Potential& pot, const SpinConfig& s) {
        pos.assign(static_cast<std::size_t>(s.n()), -1);
        list.clear();
        for (Site x = 0; x < s.n(); ++x)
            if (is_site_active(pot, x, s)) insert(x);
    }
    void insert(Site x) {
        if (pos[static_cast<std::size_t>(x)] >= 0) return;
        pos[static_cast<std::size_t>(x)] = static_cast<std::int64_t>(list.size());
        list.push_back(x);
    }
    void erase(Site x) {
        const std::int64_t p = pos[static_cast<std::size_t>(x)];
        if (p < 0) return;
        const Site last = list.back();
        list[static_cast<std::size_t>(p)] = last;
        pos[static_cast<std::size_t>(last)] = p;
        list.pop_back();
        pos[static_cast<std::size_t>(x)] = -1;
    }
    void refresh(const Potential& pot, Site x, const SpinConfig& s) {
        if (is_site_active(pot, x, s))
            insert(x);
        else
            erase(x);
    }
};

} // namespace

Trajectory run(const Potential& pot, RuleKind rule, const SpinConfig& s0,
               const RunParams& params) {
    if (!(params.t_max > 0.0)) throw UsageError("run: t_max must be > 0");
    if (params.event_cap < 1) throw UsageError("run: event_cap must be >= 1");
    if (rule == RuleKind::GlauberZeroT && pot.space().kind != SpinSpace::Kind::Ising)
        throw UsageError("run: GlauberZeroT is defined for the Ising spin space only");
    if (pot.space().size() > 16)
        throw UsageError("run: spin spaces beyond 16 values are not supported");

    Trajectory traj{s0, s0, {}, 0.0, EndReason::Absorbed, std::nullopt};
    SpinConfig& s = traj.final;
    const SpinSpace& space = pot.space();

    OccupationClock* occ = nullptr;
    if (rule == RuleKind::OccupationWeighted) {
        traj.occupation.emplace(s.n(), space.size());
        occ = &*traj.occupation;
    }

    Rng rng(params.seed, Stream::Trajectory);
    ActiveSet active;
    active.init(pot, s);

    std::vector<Site> ball;
    double t = 0.0;

    while (true) {
        if (active.list.empty()) {
            traj.end_reason = EndReason::Absorbed;
            traj.end_time = t;
            break;
        }
        const double gap = rng.exponential() / static_cast<double>(active.list.size());
        double t_next = t + gap;
        if (t_next <= t) // keep event times strictly increasing under fp rounding
            t_next = std::nextafter(t, std::numeric_limits<double>::infinity());
        if (t_next > params.t_max) {
            traj.end_reason = EndReason::TMax;
            traj.end_time = params.t_max;
            break;
        }
        t = t_next;

        const Site x = active.list[rng.below(active.list.size())];
        const Move mv = select_move(pot, rule, x, s, occ, t, rng);
        if (mv.value == s.spin(x)) continue;

        FlipEvent ev;
        ev.t = t;
        ev.site = x;
        ev.old_value = static_cast<std::int8_t>(s.spin(x));
        ev.new_value = static_cast<std::int8_t>(mv.value);
        ev.delta_h = mv.delta;
        traj.events.push_back(ev);

        if (occ) occ->advance(x, space.index(s.spin(x)), t);
        s.set(x, mv.value);

        pot.lattice().ball1(x, ball);
        for (Site z : ball) active.refresh(pot, z, s);

        if (static_cast<std::int64_t>(traj.events.size()) >= params.event_cap) {
            traj.end_reason = active.list.empty() ? EndReason::Absorbed : EndReason::EventCap;
            traj.end_time = t;
            break;
        }
    }

    if (occ) occ->finalize(s, traj.end_time);
    return traj;
}

FlipStats flip_statistics(const Trajectory& traj, std::span<const double> eps) {
    for (double e : eps)
        if (!(e >= 0.0)) throw UsageError("flip_statistics: epsilon entries must be >= 0");
    FlipStats st;
    st.eps.assign(eps.begin(), eps.end());
    st.per_site.assign(eps.size(),
                       std::vector<std::int64_t>(static_cast<std::size_t>(traj.initial.n()), 0));
    st.totals.assign(eps.size(), 0);
    for (const FlipEvent& ev : traj.events)
        for (std::size_t k = 0; k < st.eps.size(); ++k) {
            const double e = st.eps[k];
            const bool counted = e == 0.0 ? (ev.delta_h < -kZeroTol) : (ev.delta_h <= -e);
            if (counted) {
                ++st.per_site[k][static_cast<std::size_t>(ev.site)];
                ++st.totals[k];
            }
        }
    return st;
}

double flip_fraction_in_window(const Trajectory& traj, double a, double b) {
    std::vector<char> hit(static_cast<std::size_t>(traj.initial.n()), 0);
    Site n_hit = 0;
    for (const FlipEvent& ev : traj.events)
        if (ev.t > a && ev.t <= b && !hit[static_cast<std::size_t>(ev.site)]) {
            hit[static_cast<std::size_t>(ev.site)] = 1;
            ++n_hit;
        }
    return static_cast<double>(n_hit) / static_cast<double>(traj.initial.n());
}

TypeReport classify_type(std::span<const Trajectory> trajs, double t_final, int n_windows) {
    if (trajs.empty()) throw UsageError("classify_type: need at least one trajectory");
    if (n_windows < 2) throw UsageError("classify_type: need at least two windows");

    TypeReport rep;
    rep.window_fractions.assign(static_cast<std::size_t>(n_windows), 0.0);
    for (const Trajectory& tr : trajs)
        for (int m = 0; m < n_windows; ++m) {
            const double t_end = t_final / std::pow(2.0, n_windows - 1 - m);
            rep.window_fractions[static_cast<std::size_t>(m)] +=
                flip_fraction_in_window(tr, t_end / 2.0, t_end) / static_cast<double>(trajs.size());
        }

    // Jaccard overlap of the flip sets in the last two windows, averaged
    double overlap_sum = 0.0;
    int overlap_cnt = 0;
    for (const Trajectory& tr : trajs) {
        std::unordered_set<Site> prev, last;
        for (const FlipEvent& ev : tr.events) {
            if (ev.t > t_final / 4.0 && ev.t <= t_final / 2.0) prev.insert(ev.site);
            if (ev.t > t_final / 2.0 && ev.t <= t_final) last.insert(ev.site);
        }
        std::size_t inter = 0;
        for (Site x : last)
            if (prev.count(x)) ++inter;
        const std::size_t uni = prev.size() + last.size() - inter;
        if (uni > 0) {
            overlap_sum += static_cast<double>(inter) / static_cast<double>(uni);
            ++overlap_cnt;
        }
    }
    rep.overlap = overlap_cnt > 0 ? overlap_sum / overlap_cnt : 0.0;
    rep.label = label_from(rep.window_fractions, rep.overlap);
    return rep;
}

TypeLabel label_from(std::span<const double> window_fractions, double overlap) {
    if (window_fractions.size() < 2) return TypeLabel::Inconclusive;
    const double f_last = window_fractions.back();
    const double f_prev = window_fractions[window_fractions.size() - 2];
    const bool stabilized = std::abs(f_last - f_prev) <= 0.3 * std::max(f_last, f_prev);

    if (f_last < 0.05) return TypeLabel::FLike;
    if (stabilized) return overlap >= 0.8 ? TypeLabel::MLike : TypeLabel::ILike;
    if (f_last > f_prev && f_last >= 0.5) return TypeLabel::ILike;
    return TypeLabel::Inconclusive;
}

} // namespace quench
