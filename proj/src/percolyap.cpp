#include "quench/percolyap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quench/numeric.hpp"
#include "quench/rng.hpp"

namespace quench {

namespace {

std::int64_t ipow_checked(std::int64_t base, std::int64_t exp, std::int64_t limit) {
    std::int64_t v = 1;
    for (std::int64_t i = 0; i < exp; ++i) {
        if (v > limit / base) return limit + 1; // saturate past the limit
        v *= base;
    }
    return v;
}

// union-find with path compression and union by size
struct UnionFind {
    std::vector<Site> parent;
    std::vector<Site> size;

    explicit UnionFind(Site n) : parent(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1) {
        for (Site i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    }
    Site find(Site x) {
        Site root = x;
        while (parent[static_cast<std::size_t>(root)] != root) root = parent[static_cast<std::size_t>(root)];
        while (parent[static_cast<std::size_t>(x)] != root) {
            const Site next = parent[static_cast<std::size_t>(x)];
            parent[static_cast<std::size_t>(x)] = root;
            x = next;
        }
        return root;
    }
    void unite(Site a, Site b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)]) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
    }
};

} // namespace

double k_bond(const Potential& pot, Site x, Site y, std::int64_t eval_budget) {
    const TorusLattice& lat = pot.lattice();
    lat.check_site(x);
    lat.check_site(y);

    const auto nb_y = lat.neighbors(y);
    bool adjacent = false;
    for (Site z : nb_y)
        if (z == x) adjacent = true;
    if (!adjacent) throw UsageError("k_bond: sites are not lattice neighbors");

    const SpinSpace& space = pot.space();
    const int q = space.size();
    const int d = lat.dim();
    const std::int64_t evals = ipow_checked(q, 2 * d + 1, eval_budget);
    if (evals > eval_budget)
        throw Refusal("k_bond: |S0|^(2d+1) = " + std::to_string(q) + "^" +
                      std::to_string(2 * d + 1) + " evaluations exceed the budget " +
                      std::to_string(eval_budget));

    // vary {S_z : z in ball(y,1), z != x}; S_x is the probe
    std::vector<Site> varied;
    varied.push_back(y);
    for (Site z : nb_y)
        if (z != x) varied.push_back(z);

    SpinConfig scratch(lat, space, space.value(0));
    const int m = static_cast<int>(varied.size());
    std::vector<int> digit(static_cast<std::size_t>(m), 0);

    std::int64_t n_assign = 1;
    for (int k = 0; k < m; ++k) n_assign *= q;

    double best = 0.0;
    for (std::int64_t idx = 0; idx < n_assign; ++idx) {
        for (int k = 0; k < m; ++k)
            scratch.set(varied[static_cast<std::size_t>(k)],
                        space.value(digit[static_cast<std::size_t>(k)]));
        double vmin = 0.0, vmax = 0.0;
        for (int e = 0; e < q; ++e) {
            scratch.set(x, space.value(e));
            const double v = pot.local_energy(y, scratch);
            if (e == 0) {
                vmin = vmax = v;
            } else {
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
        }
        best = std::max(best, vmax - vmin);
        for (int k = 0; k < m; ++k) {
            if (++digit[static_cast<std::size_t>(k)] < q) break;
            digit[static_cast<std::size_t>(k)] = 0;
        }
    }
    return best;
}

BondWeights k_star_field(const Potential& pot, std::int64_t eval_budget) {
    const TorusLattice& lat = pot.lattice();
    BondWeights w;
    w.k_dir.resize(static_cast<std::size_t>(2 * lat.n_bonds()));
    w.k_star.resize(static_cast<std::size_t>(lat.n_bonds()));
    for (std::int64_t id = 0; id < lat.n_bonds(); ++id) {
        const Bond b = lat.bond(id);
        const double kab = k_bond(pot, b.a, b.b, eval_budget);
        const double kba = k_bond(pot, b.b, b.a, eval_budget);
        w.k_dir[static_cast<std::size_t>(2 * id)] = kab;
        w.k_dir[static_cast<std::size_t>(2 * id + 1)] = kba;
        w.k_star[static_cast<std::size_t>(id)] = std::max(kab, kba);
    }
    return w;
}

double k_star_quantile(std::span<const double> k_star, double q) {
    if (k_star.empty()) throw UsageError("k_star_quantile: empty field");
    if (q < 0.0 || q > 1.0) throw UsageError("k_star_quantile: q must be in [0,1]");
    std::vector<double> v(k_star.begin(), k_star.end());
    std::sort(v.begin(), v.end());
    const auto n = static_cast<std::int64_t>(v.size());
    std::int64_t idx = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n))) - 1;
    idx = std::clamp<std::int64_t>(idx, 0, n - 1);
    return v[static_cast<std::size_t>(idx)];
}

ClusterPartition open_clusters(const TorusLattice& lat, std::span<const double> k_star,
                               double threshold) {
    if (threshold < 0.0) throw UsageError("open_clusters: threshold must be >= 0");
    if (static_cast<std::int64_t>(k_star.size()) != lat.n_bonds())
        throw UsageError("open_clusters: K* field size mismatch");

    UnionFind uf(lat.n_sites());
    for (std::int64_t id = 0; id < lat.n_bonds(); ++id)
        if (k_star[static_cast<std::size_t>(id)] > threshold) {
            const Bond b = lat.bond(id);
            uf.unite(b.a, b.b);
        }

    ClusterPartition part;
    part.threshold = threshold;
    part.cluster_of.assign(static_cast<std::size_t>(lat.n_sites()), -1);

    // dense ids in order of smallest member (= first root encountered scanning sites)
    std::int32_t next_id = 0;
    std::vector<std::int32_t> id_of_root(static_cast<std::size_t>(lat.n_sites()), -1);
    for (Site x = 0; x < lat.n_sites(); ++x) {
        const Site r = uf.find(x);
        if (id_of_root[static_cast<std::size_t>(r)] < 0) id_of_root[static_cast<std::size_t>(r)] = next_id++;
        part.cluster_of[static_cast<std::size_t>(x)] = id_of_root[static_cast<std::size_t>(r)];
    }
    part.members.assign(static_cast<std::size_t>(next_id), {});
    for (Site x = 0; x < lat.n_sites(); ++x)
        part.members[static_cast<std::size_t>(part.cluster_of[static_cast<std::size_t>(x)])].push_back(x);

    part.closures.assign(static_cast<std::size_t>(next_id), {});
    std::vector<Site> ball;
    for (std::size_t c = 0; c < part.members.size(); ++c) {
        auto& cl = part.closures[c];
        for (Site x : part.members[c]) {
            lat.ball1(x, ball);
            cl.insert(cl.end(), ball.begin(), ball.end());
        }
        std::sort(cl.begin(), cl.end());
        cl.erase(std::unique(cl.begin(), cl.end()), cl.end());
    }
    return part;
}

double cluster_energy(const Potential& pot, std::span<const Site> members, const SpinConfig& s) {
    NeumaierSum sum;
    for (Site z : members)
        sum.add(pot.local_energy(z, s));
    return sum.value();
}

double LyapunovTable::value(double v_c) const {
    // containing-group lookup: largest level <= v_c, membership within kZeroTol
    const auto it = std::upper_bound(levels.begin(), levels.end(), v_c);
    if (it != levels.begin()) {
        const std::size_t i = static_cast<std::size_t>(it - levels.begin()) - 1;
        if (v_c - levels[i] <= kZeroTol * 1.0001 + 1e-12 * std::abs(v_c))
            return lvalues[i];
    }
    // tiny downward rounding against the next level up
    if (it != levels.end() && *it - v_c <= 1e-12 * std::max(1.0, std::abs(v_c)))
        return lvalues[static_cast<std::size_t>(it - levels.begin())];
    throw UsageError("LyapunovTable: value is not an attainable cluster energy");
}

LyapunovTable build_lyapunov(const Potential& pot, const ClusterPartition& part, int cluster_id,
                             double k, std::int64_t enum_cap) {
    if (cluster_id < 0 || static_cast<std::size_t>(cluster_id) >= part.n_clusters())
        throw UsageError("build_lyapunov: bad cluster id");
    const auto& members = part.members[static_cast<std::size_t>(cluster_id)];
    const auto& closure = part.closures[static_cast<std::size_t>(cluster_id)];
    const SpinSpace& space = pot.space();
    const int q = space.size();

    const std::int64_t n_conf = ipow_checked(q, static_cast<std::int64_t>(closure.size()), enum_cap);
    if (n_conf > enum_cap)
        throw Refusal("build_lyapunov: cluster " + std::to_string(cluster_id) + " of size " +
                      std::to_string(members.size()) + " (closure " + std::to_string(closure.size()) +
                      ") needs " + std::to_string(q) + "^" + std::to_string(closure.size()) +
                      " configurations, above the cap " + std::to_string(enum_cap) +
                      "; raise K or the cap");

    SpinConfig scratch(pot.lattice(), space, space.value(0));
    const int m = static_cast<int>(closure.size());
    std::vector<int> digit(static_cast<std::size_t>(m), 0);

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_conf));
    for (std::int64_t idx = 0; idx < n_conf; ++idx) {
        for (int j = 0; j < m; ++j)
            scratch.set(closure[static_cast<std::size_t>(j)],
                        space.value(digit[static_cast<std::size_t>(j)]));
        values.push_back(cluster_energy(pot, members, scratch));
        for (int j = 0; j < m; ++j) {
            if (++digit[static_cast<std::size_t>(j)] < q) break;
            digit[static_cast<std::size_t>(j)] = 0;
        }
    }
    LyapunovTable table = make_capped_table(std::move(values), 4.0 * pot.lattice().dim() * k);
    table.config_count = n_conf;
    return table;
}

LyapunovTable make_capped_table(std::vector<double> values, double cap) {
    if (values.empty()) throw UsageError("make_capped_table: no values");
    std::sort(values.begin(), values.end());

    LyapunovTable table;
    table.cap = cap;
    table.config_count = static_cast<std::int64_t>(values.size());

    // merge values within kZeroTol of the group's first member into one level
    for (double v : values)
        if (table.levels.empty() || v - table.levels.back() > kZeroTol)
            table.levels.push_back(v);

    table.lvalues.resize(table.levels.size());
    double acc = 0.0;
    table.lvalues[0] = 0.0;
    for (std::size_t i = 1; i < table.levels.size(); ++i) {
        acc += std::min(table.levels[i] - table.levels[i - 1], table.cap);
        table.lvalues[i] = acc;
    }
    return table;
}

std::vector<LyapunovTable> build_all_tables(const Potential& pot, const ClusterPartition& part,
                                            double k, std::int64_t enum_cap) {
    std::vector<LyapunovTable> tables;
    tables.reserve(part.n_clusters());
    for (std::size_t c = 0; c < part.n_clusters(); ++c)
        tables.push_back(build_lyapunov(pot, part, static_cast<int>(c), k, enum_cap));
    return tables;
}

double eval_l(const Potential& pot, const ClusterPartition& part,
              std::span<const LyapunovTable> tables, const SpinConfig& s) {
    if (tables.size() != part.n_clusters())
        throw UsageError("eval_l: table count does not match the partition");
    NeumaierSum sum;
    for (std::size_t c = 0; c < part.n_clusters(); ++c)
        sum.add(tables[c].value(cluster_energy(pot, part.members[c], s)));
    return sum.value();
}

DecompositionReport decomposition_check(const Potential& pot, const ClusterPartition& part,
                                        const SpinConfig& s) {
    DecompositionReport rep;
    NeumaierSum sum;
    for (const auto& members : part.members)
        sum.add(cluster_energy(pot, members, s));
    rep.sum_v_c = sum.value();
    rep.total_h = pot.total_energy(s);
    const double scale = std::max({1.0, std::abs(rep.sum_v_c), std::abs(rep.total_h)});
    rep.rel_err = std::abs(rep.sum_v_c - rep.total_h) / scale;
    rep.ok = rep.rel_err <= 1e-9;
    return rep;
}

AuditRecord audit_flip(const Potential& pot, const ClusterPartition& part,
                       std::span<const LyapunovTable> tables, SpinConfig& s, Site x,
                       int new_value, double k) {
    const double delta_h = pot.delta(x, s, new_value);
    if (delta_h > kZeroTol)
        throw UsageError("audit_flip: not a zero-temperature move (delta_h > 0)");
    if (pot.lattice().dim() > 4)
        throw UsageError("audit_flip: dimensions above 4 are not supported");

    const std::int32_t home = part.cluster_of[static_cast<std::size_t>(x)];
    // distinct clusters with x in their closure: home plus neighbor clusters
    std::int32_t others[8];
    int n_others = 0;
    for (Site z : pot.lattice().neighbors(x)) {
        const std::int32_t c = part.cluster_of[static_cast<std::size_t>(z)];
        if (c == home) continue;
        bool seen = false;
        for (int i = 0; i < n_others; ++i)
            if (others[i] == c) seen = true;
        if (!seen) others[n_others++] = c;
    }

    const int old_value = s.spin(x);
    double v_before[9], v_after[9];
    v_before[0] = cluster_energy(pot, part.members[static_cast<std::size_t>(home)], s);
    for (int i = 0; i < n_others; ++i)
        v_before[i + 1] = cluster_energy(pot, part.members[static_cast<std::size_t>(others[i])], s);
    s.set(x, new_value);
    v_after[0] = cluster_energy(pot, part.members[static_cast<std::size_t>(home)], s);
    for (int i = 0; i < n_others; ++i)
        v_after[i + 1] = cluster_energy(pot, part.members[static_cast<std::size_t>(others[i])], s);
    s.set(x, old_value);

    AuditRecord rec;
    rec.delta_h = delta_h;
    rec.delta_v_home = v_after[0] - v_before[0];

    const double dl_home = tables[static_cast<std::size_t>(home)].value(v_after[0]) -
                           tables[static_cast<std::size_t>(home)].value(v_before[0]);
    NeumaierSum star;
    for (int i = 0; i < n_others; ++i) {
        const auto& tb = tables[static_cast<std::size_t>(others[i])];
        star.add(tb.value(v_after[i + 1]) - tb.value(v_before[i + 1]));
    }
    rec.delta_l_star = star.value();
    rec.delta_l = dl_home + rec.delta_l_star;

    const double d = pot.lattice().dim();
    const double two_dk = 2.0 * d * k;
    const double four_dk = 4.0 * d * k;
    rec.linear_regime = std::abs(rec.delta_v_home) <= four_dk;

    const double tol_k = 1e-9 * std::max(1.0, two_dk);
    const double tol_eq = 1e-9 * std::max({1.0, std::abs(rec.delta_h), std::abs(rec.delta_l)});

    rec.ok_star_bound = std::abs(rec.delta_l_star) <= two_dk + tol_k;
    rec.ok_linear_equality = !rec.linear_regime || std::abs(rec.delta_l - rec.delta_h) <= tol_eq;
    rec.ok_contract = rec.delta_h >= -two_dk ? rec.delta_l <= rec.delta_h + tol_eq
                                             : rec.delta_l <= -two_dk + tol_k;
    rec.ok_zero = std::abs(rec.delta_h) > kZeroTol || std::abs(rec.delta_l) <= kZeroTol;
    return rec;
}

AuditSummary audit_trajectory(const Potential& pot, const ClusterPartition& part,
                              std::span<const LyapunovTable> tables, Trajectory& traj, double k,
                              std::vector<AuditRecord>* records) {
    AuditSummary sum;
    SpinConfig s = traj.initial;
    sum.l_initial = eval_l(pot, part, tables, s);

    const double tol_mono = 1e-9 * std::max(1.0, 2.0 * pot.lattice().dim() * k);
    NeumaierSum dl_acc;
    if (records) {
        records->clear();
        records->reserve(traj.events.size());
    }
    for (FlipEvent& ev : traj.events) {
        const AuditRecord rec = audit_flip(pot, part, tables, s, ev.site, ev.new_value, k);
        ev.delta_l = rec.delta_l;
        if (records) records->push_back(rec);
        dl_acc.add(rec.delta_l);
        ++sum.flips;
        if (!rec.linear_regime) ++sum.capped_flips;
        if (!rec.ok_star_bound) ++sum.violations_star;
        if (!rec.ok_linear_equality) ++sum.violations_linear;
        if (!rec.ok_contract) ++sum.violations_contract;
        if (!rec.ok_zero) ++sum.violations_zero;
        if (rec.delta_l > tol_mono) sum.l_monotone = false;
        s.set(ev.site, ev.new_value);
    }
    sum.l_final = sum.l_initial + dl_acc.value();
    sum.l_replay_err = std::abs(sum.l_final - eval_l(pot, part, tables, s));
    return sum;
}

ExpMomentReport exp_moment_diagnostic(std::span<const std::int64_t> origin_cluster_sizes,
                                      double alpha) {
    if (origin_cluster_sizes.size() < 100)
        throw UsageError("exp_moment_diagnostic: need at least 100 partitions");
    ExpMomentReport rep;
    rep.alpha = alpha;
    rep.samples = static_cast<std::int64_t>(origin_cluster_sizes.size());

    std::int64_t max_n = 0;
    for (std::int64_t n : origin_cluster_sizes) max_n = std::max(max_n, n);
    const double m_star = alpha * static_cast<double>(max_n);
    double acc = 0.0;
    for (std::int64_t n : origin_cluster_sizes)
        acc += std::exp(alpha * static_cast<double>(n) - m_star);
    const double lse = m_star + std::log(acc);
    rep.log_mean = lse - std::log(static_cast<double>(rep.samples));
    rep.mean = rep.log_mean < 700.0 ? std::exp(rep.log_mean)
                                    : std::numeric_limits<double>::infinity();
    rep.max_term_share = std::exp(m_star - lse);
    rep.overflowed = rep.log_mean > 700.0;
    rep.stable = !rep.overflowed && rep.max_term_share <= 0.5;
    return rep;
}

ExpMomentReport exp_moment_diagnostic(std::span<const ClusterPartition> partitions, double alpha,
                                      Site origin) {
    std::vector<std::int64_t> sizes;
    sizes.reserve(partitions.size());
    for (const auto& p : partitions) {
        const std::int32_t c = p.cluster_of[static_cast<std::size_t>(origin)];
        sizes.push_back(static_cast<std::int64_t>(p.members[static_cast<std::size_t>(c)].size()));
    }
    return exp_moment_diagnostic(sizes, alpha);
}

namespace {

bool cluster_spans_some_side(const TorusLattice& lat, const std::vector<Site>& members) {
    const int d = lat.dim();
    for (int a = 0; a < d; ++a) {
        const int L = lat.dims()[static_cast<std::size_t>(a)];
        if (static_cast<int>(members.size()) < L) continue;
        std::vector<char> seen(static_cast<std::size_t>(L), 0);
        int count = 0;
        for (Site x : members) {
            const int c = lat.coords(x)[static_cast<std::size_t>(a)];
            if (!seen[static_cast<std::size_t>(c)]) {
                seen[static_cast<std::size_t>(c)] = 1;
                ++count;
            }
        }
        if (count == L) return true;
    }
    return false;
}

} // namespace

std::vector<TailFit> cluster_tail(const TorusLattice& lat, Potential::Kind kind, SpinSpace space,
                                  const DisorderSpec& base_spec, std::span<const double> ks,
                                  int n_realizations, std::uint64_t seed) {
    if (n_realizations < 1) throw UsageError("cluster_tail: need at least one realization");
    base_spec.validate();

    std::vector<TailFit> fits(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        fits[i].k = ks[i];
        fits[i].moment_threshold =
            (2.0 * lat.dim() + 1.0) * std::log(static_cast<double>(space.size()));
    }

    for (int r = 0; r < n_realizations; ++r) {
        DisorderSpec spec = base_spec;
        spec.seed = derive_seed(seed, Stream::Replicate, static_cast<std::uint64_t>(r));
        const DisorderRealization dis = sample(lat, spec);
        const Potential pot(kind, lat, dis, space);
        const BondWeights w = k_star_field(pot);

        for (std::size_t i = 0; i < ks.size(); ++i) {
            const ClusterPartition part = open_clusters(lat, w.k_star, ks[i]);
            TailFit& fit = fits[i];
            for (const auto& members : part.members) {
                const auto sz = static_cast<std::int64_t>(members.size());
                if (static_cast<std::int64_t>(fit.exceed_counts.size()) < sz - 1)
                    fit.exceed_counts.resize(static_cast<std::size_t>(sz - 1), 0);
                // each member site is an origin whose cluster exceeds n for n < sz
                for (std::int64_t n = 1; n < sz; ++n)
                    fit.exceed_counts[static_cast<std::size_t>(n - 1)] += sz;
                if (!fit.spanning_warning && cluster_spans_some_side(lat, members))
                    fit.spanning_warning = true;
            }
            fit.samples += lat.n_sites();
            const std::int32_t c0 = part.cluster_of[0];
            fit.origin_sizes.push_back(
                static_cast<std::int64_t>(part.members[static_cast<std::size_t>(c0)].size()));
        }
    }

    // least-squares fit of ln P(|C|>n) against n over the supported range
    for (TailFit& fit : fits) {
        std::vector<double> xs, ys;
        for (std::size_t n = 0; n < fit.exceed_counts.size(); ++n)
            if (fit.exceed_counts[n] > 0) {
                xs.push_back(static_cast<double>(n + 1));
                ys.push_back(std::log(static_cast<double>(fit.exceed_counts[n]) /
                                      static_cast<double>(fit.samples)));
            }
        if (xs.size() < 3) {
            fit.fitted = false;
            continue;
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double n = static_cast<double>(xs.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        fit.lambda_hat = -slope;
        fit.log_m_hat = (sy - slope * sx) / n;
        fit.fitted = true;
    }
    return fits;
}

} // namespace quench
