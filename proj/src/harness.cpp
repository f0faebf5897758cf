#include "quench/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "quench/numeric.hpp"
#include "quench/rng.hpp"

namespace quench {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw UsageError("cannot open " + p.string() + " for writing");
    os << content;
}

std::string events_csv(const Trajectory& traj) {
    std::string s = "t,site,old,new,delta_h,delta_l\n";
    for (const FlipEvent& ev : traj.events) {
        s += fmt17(ev.t);
        s += ',' + std::to_string(ev.site);
        s += ',' + std::to_string(static_cast<int>(ev.old_value));
        s += ',' + std::to_string(static_cast<int>(ev.new_value));
        s += ',' + fmt17(ev.delta_h);
        s += ',';
        if (!std::isnan(ev.delta_l)) s += fmt17(ev.delta_l);
        s += '\n';
    }
    return s;
}

std::string flips_csv(const Trajectory& traj) {
    const Site n = traj.initial.n();
    std::vector<std::int64_t> total(static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> strict(static_cast<std::size_t>(n), 0);
    for (const FlipEvent& ev : traj.events) {
        ++total[static_cast<std::size_t>(ev.site)];
        if (ev.delta_h < -kZeroTol) ++strict[static_cast<std::size_t>(ev.site)];
    }
    std::string s = "site,total_flips,strict_drops\n";
    for (Site x = 0; x < n; ++x)
        s += std::to_string(x) + ',' + std::to_string(total[static_cast<std::size_t>(x)]) + ',' +
             std::to_string(strict[static_cast<std::size_t>(x)]) + '\n';
    return s;
}

// replay-based sampling of energy / Lyapunov density and active fraction
std::string trace_csv(const Potential& pot, const Trajectory& traj, double h0, double l0,
                      bool audited, int stride) {
    const double n = static_cast<double>(traj.initial.n());
    SpinConfig s = traj.initial;

    std::string out = "t,energy_density,lyapunov_density,active_fraction\n";
    NeumaierSum h_acc, l_acc;

    auto active_fraction = [&]() {
        Site cnt = 0;
        for (Site x = 0; x < s.n(); ++x)
            if (is_site_active(pot, x, s)) ++cnt;
        return static_cast<double>(cnt) / n;
    };
    auto emit = [&](double t) {
        out += fmt17(t);
        out += ',' + fmt17((h0 + h_acc.value()) / n) + ',';
        if (audited) out += fmt17((l0 + l_acc.value()) / n);
        out += ',' + fmt17(active_fraction()) + '\n';
    };

    emit(0.0);
    std::int64_t i = 0;
    for (const FlipEvent& ev : traj.events) {
        h_acc.add(ev.delta_h);
        if (audited && !std::isnan(ev.delta_l)) l_acc.add(ev.delta_l);
        s.set(ev.site, ev.new_value);
        ++i;
        if (stride > 0 && i % stride == 0 &&
            i != static_cast<std::int64_t>(traj.events.size()))
            emit(ev.t);
    }
    emit(traj.end_time);
    return out;
}

std::string clusters_csv(const ClusterPartition& part) {
    std::string s = "K,cluster_id,size,closure_size\n";
    for (std::size_t c = 0; c < part.n_clusters(); ++c)
        s += fmt17(part.threshold) + ',' + std::to_string(c) + ',' +
             std::to_string(part.members[c].size()) + ',' +
             std::to_string(part.closures[c].size()) + '\n';
    return s;
}

std::string audit_csv(const Trajectory& traj, const std::vector<AuditRecord>& recs) {
    std::string s = "t,site,delta_h,delta_l,delta_l_star,regime\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const FlipEvent& ev = traj.events[i];
        const AuditRecord& r = recs[i];
        s += fmt17(ev.t) + ',' + std::to_string(ev.site) + ',' + fmt17(r.delta_h) + ',' +
             fmt17(r.delta_l) + ',' + fmt17(r.delta_l_star) + ',' +
             (r.linear_regime ? "linear" : "capped") + '\n';
    }
    return s;
}

std::string eps_header(const std::vector<double>& eps) {
    std::string s;
    for (double e : eps) s += ",n_eps_" + fmt17(e);
    return s;
}

std::string replicates_csv(const ExperimentReport& rep, const ExperimentConfig& cfg) {
    std::string s = "replicate,end_reason,end_time,events,flipped_sites,max_site_flips,h_initial,h_final,"
                    "sum_delta_h,telescope_err,max_delta_h";
    s += eps_header(cfg.epsilons);
    for (int w = 1; w <= cfg.windows; ++w) s += ",w" + std::to_string(w);
    s += ",overlap,counting_h_ok,counting_l_ok,audited,k_threshold,clusters,l_initial,l_final,"
         "audit_flips,audit_violations,capped_flips,l_monotone,decomp_rel_err\n";
    for (const ReplicateReport& r : rep.replicates) {
        s += std::to_string(r.index);
        s += std::string(",") + to_string(r.end_reason);
        s += ',' + fmt17(r.end_time) + ',' + std::to_string(r.events) + ',' +
             std::to_string(r.flipped_sites) + ',' + std::to_string(r.max_site_flips) + ',' +
             fmt17(r.h_initial) + ',' +
             fmt17(r.h_final) + ',' + fmt17(r.sum_delta_h) + ',' + fmt17(r.telescope_err) + ',' +
             fmt17(r.max_delta_h);
        for (std::int64_t v : r.eps_totals) s += ',' + std::to_string(v);
        for (double f : r.window_fractions) s += ',' + fmt17(f);
        s += ',' + fmt17(r.overlap);
        s += r.counting_h_ok ? ",1" : ",0";
        s += r.counting_l_ok ? ",1" : ",0";
        s += r.audited ? ",1" : ",0";
        s += ',' + fmt17(r.k_threshold) + ',' + std::to_string(r.clusters) + ',' +
             fmt17(r.l_initial) + ',' + fmt17(r.l_final) + ',' + std::to_string(r.audit_flips) +
             ',' + std::to_string(r.audit_violations) + ',' + std::to_string(r.capped_flips);
        s += r.l_monotone ? ",1" : ",0";
        s += ',' + fmt17(r.decomposition_rel_err) + '\n';
    }
    return s;
}

std::string tail_csv(const std::vector<TailFit>& tail) {
    std::string s = "K,n,exceed_count,samples\n";
    for (const TailFit& f : tail)
        for (std::size_t n = 0; n < f.exceed_counts.size(); ++n)
            s += fmt17(f.k) + ',' + std::to_string(n + 1) + ',' +
                 std::to_string(f.exceed_counts[n]) + ',' + std::to_string(f.samples) + '\n';
    return s;
}

} // namespace

void aggregate_report(ExperimentReport& rep) {
    const auto n = static_cast<double>(rep.replicates.size());
    rep.absorbed_fraction = 0.0;
    rep.mean_events = 0.0;
    rep.mean_end_time = 0.0;
    rep.mean_overlap = 0.0;
    rep.counting_violations = 0;
    rep.audit_violations = 0;
    rep.eps_totals_sum.clear();
    rep.mean_window_fractions.clear();
    if (rep.replicates.empty()) {
        rep.label = TypeLabel::Inconclusive;
        return;
    }
    rep.eps_totals_sum.assign(rep.replicates[0].eps_totals.size(), 0);
    rep.mean_window_fractions.assign(rep.replicates[0].window_fractions.size(), 0.0);
    for (const ReplicateReport& r : rep.replicates) {
        if (r.end_reason == EndReason::Absorbed) rep.absorbed_fraction += 1.0;
        rep.mean_events += static_cast<double>(r.events);
        rep.mean_end_time += r.end_time;
        rep.mean_overlap += r.overlap;
        if (!r.counting_h_ok || !r.counting_l_ok) ++rep.counting_violations;
        rep.audit_violations += r.audit_violations;
        for (std::size_t i = 0; i < r.eps_totals.size(); ++i)
            rep.eps_totals_sum[i] += r.eps_totals[i];
        for (std::size_t i = 0; i < r.window_fractions.size(); ++i)
            rep.mean_window_fractions[i] += r.window_fractions[i];
    }
    rep.absorbed_fraction /= n;
    rep.mean_events /= n;
    rep.mean_end_time /= n;
    rep.mean_overlap /= n;
    for (double& f : rep.mean_window_fractions) f /= n;
    rep.label = label_from(rep.mean_window_fractions, rep.mean_overlap);
}

std::string ExperimentReport::to_json() const {
    ordered_json j;
    j["mode"] = to_string(mode);
    j["config"] = config_text;
    j["aggregate"] = {
        {"replicates", replicates.size()},
        {"absorbed_fraction", absorbed_fraction},
        {"mean_events", mean_events},
        {"mean_end_time", mean_end_time},
        {"eps_totals", eps_totals_sum},
        {"window_fractions", mean_window_fractions},
        {"overlap", mean_overlap},
        {"label", to_string(label)},
        {"counting_violations", counting_violations},
        {"audit_violations", audit_violations},
    };
    j["replicates"] = ordered_json::array();
    for (const ReplicateReport& r : replicates) {
        ordered_json rj;
        rj["index"] = r.index;
        rj["end_reason"] = to_string(r.end_reason);
        rj["end_time"] = r.end_time;
        rj["events"] = r.events;
        rj["flipped_sites"] = r.flipped_sites;
        rj["max_site_flips"] = r.max_site_flips;
        rj["h_initial"] = r.h_initial;
        rj["h_final"] = r.h_final;
        rj["sum_delta_h"] = r.sum_delta_h;
        rj["telescope_err"] = r.telescope_err;
        rj["max_delta_h"] = r.max_delta_h;
        rj["eps_totals"] = r.eps_totals;
        rj["window_fractions"] = r.window_fractions;
        rj["overlap"] = r.overlap;
        rj["counting_h_ok"] = r.counting_h_ok;
        rj["counting_l_ok"] = r.counting_l_ok;
        rj["audited"] = r.audited;
        if (r.audited) {
            rj["k_threshold"] = r.k_threshold;
            rj["clusters"] = r.clusters;
            rj["l_initial"] = r.l_initial;
            rj["l_final"] = r.l_final;
            rj["audit_flips"] = r.audit_flips;
            rj["audit_violations"] = r.audit_violations;
            rj["capped_flips"] = r.capped_flips;
            rj["l_monotone"] = r.l_monotone;
            rj["decomposition_rel_err"] = r.decomposition_rel_err;
        }
        j["replicates"].push_back(rj);
    }
    if (has_percolation) {
        j["percolation"] = ordered_json::array();
        for (std::size_t i = 0; i < tail.size(); ++i) {
            const TailFit& f = tail[i];
            ordered_json tj;
            tj["K"] = f.k;
            tj["samples"] = f.samples;
            tj["fitted"] = f.fitted;
            tj["lambda_hat"] = f.lambda_hat;
            tj["log_m_hat"] = f.log_m_hat;
            tj["moment_threshold"] = f.moment_threshold;
            tj["spanning_warning"] = f.spanning_warning;
            if (i < exp_moments.size() && exp_moments[i].samples > 0) {
                tj["exp_moment"] = {
                    {"alpha", exp_moments[i].alpha},
                    {"log_mean", exp_moments[i].log_mean},
                    {"max_term_share", exp_moments[i].max_term_share},
                    {"stable", exp_moments[i].stable},
                };
            }
            j["percolation"].push_back(tj);
        }
    }
    return j.dump(2) + "\n";
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, RunMode mode) {
    cfg.validate();
    const TorusLattice lat(cfg.dims);
    const int d = lat.dim();

    ExperimentReport report;
    report.mode = mode;
    report.config_text = cfg.to_text();

    const bool emit = !cfg.out_dir.empty() && cfg.replicates > 0;
    fs::path out;
    if (emit) {
        out = cfg.out_dir;
        fs::create_directories(out);
        write_file(out / "config.txt", report.config_text);
    }

    const Potential::Kind pot_kind = cfg.space.kind == SpinSpace::Kind::Ising
                                         ? Potential::Kind::IsingPair
                                         : Potential::Kind::PottsDelta;

    if (mode == RunMode::Percolation) {
        DisorderSpec base = cfg.disorder;
        std::vector<double> ks = cfg.tail_ks;
        if (ks.empty()) {
            // resolve the policy on one pilot realization
            DisorderSpec pilot = base;
            pilot.seed = cfg.disorder_seed_fixed ? base.seed
                                                 : derive_seed(cfg.seed, Stream::Replicate, 0);
            const DisorderRealization dis = sample(lat, pilot);
            const Potential pot(pot_kind, lat, dis, cfg.space);
            const BondWeights w = k_star_field(pot);
            ks.push_back(cfg.k_policy.kind == KPolicy::Kind::Quantile
                             ? k_star_quantile(w.k_star, cfg.k_policy.param)
                             : cfg.k_policy.param);
        }
        report.has_percolation = true;
        report.tail = cluster_tail(lat, pot_kind, cfg.space, base, ks, cfg.tail_samples, cfg.seed);
        const double alpha = (2.0 * d + 1.0) * std::log(static_cast<double>(cfg.space.size()));
        for (const TailFit& f : report.tail) {
            if (f.origin_sizes.size() >= 100)
                report.exp_moments.push_back(exp_moment_diagnostic(f.origin_sizes, alpha));
            else
                report.exp_moments.push_back({});
        }
        aggregate_report(report);
        if (emit) {
            write_file(out / "tail.csv", tail_csv(report.tail));
            // cluster listing for the first K on a fresh representative realization
            DisorderSpec pilot = base;
            pilot.seed = cfg.disorder_seed_fixed ? base.seed
                                                 : derive_seed(cfg.seed, Stream::Replicate, 0);
            const DisorderRealization dis = sample(lat, pilot);
            const Potential pot(pot_kind, lat, dis, cfg.space);
            const BondWeights w = k_star_field(pot);
            const ClusterPartition part = open_clusters(lat, w.k_star, ks.front());
            write_file(out / "clusters.csv", clusters_csv(part));
            write_file(out / "report.json", report.to_json());
        }
        return report;
    }

    const bool audit = mode == RunMode::Audit;

    for (int r = 0; r < cfg.replicates; ++r) {
        const std::uint64_t rep_seed = derive_seed(cfg.seed, Stream::Replicate,
                                                   static_cast<std::uint64_t>(r));
        DisorderSpec spec = cfg.disorder;
        if (!cfg.disorder_seed_fixed) spec.seed = rep_seed;

        const DisorderRealization dis = sample(lat, spec);
        const Potential pot(pot_kind, lat, dis, cfg.space);
        const SpinConfig s0 = init_config(lat, cfg.space, cfg.init_weights, rep_seed);

        Trajectory traj = run(pot, cfg.rule, s0, {cfg.t_max, cfg.event_cap, rep_seed});

        ReplicateReport rr;
        rr.index = r;
        rr.end_reason = traj.end_reason;
        rr.end_time = traj.end_time;
        rr.events = static_cast<std::int64_t>(traj.events.size());
        rr.h_initial = pot.total_energy(s0);
        rr.h_final = pot.total_energy(traj.final);
        NeumaierSum dh;
        rr.max_delta_h = 0.0;
        for (const FlipEvent& ev : traj.events) {
            dh.add(ev.delta_h);
            rr.max_delta_h = std::max(rr.max_delta_h, ev.delta_h);
        }
        rr.sum_delta_h = dh.value();
        rr.telescope_err = std::abs(rr.h_final - rr.h_initial - rr.sum_delta_h);

        const FlipStats stats = flip_statistics(traj, cfg.epsilons);
        rr.eps_totals = stats.totals;
        {
            std::vector<std::int64_t> per_site(static_cast<std::size_t>(lat.n_sites()), 0);
            for (const FlipEvent& ev : traj.events) ++per_site[static_cast<std::size_t>(ev.site)];
            for (std::int64_t c : per_site) {
                if (c > 0) ++rr.flipped_sites;
                rr.max_site_flips = std::max(rr.max_site_flips, c);
            }
        }

        const Trajectory* tp = &traj;
        const TypeReport tr = classify_type({tp, 1}, cfg.t_max, cfg.windows);
        rr.window_fractions = tr.window_fractions;
        rr.overlap = tr.overlap;

        // energy counting inequality per replicate: H(t)-H(0) <= -eps * N(eps)
        rr.counting_h_ok = true;
        for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
            const double bound = -cfg.epsilons[i] * static_cast<double>(stats.totals[i]);
            if (rr.sum_delta_h > bound + 1e-8 * std::max(1.0, std::abs(bound)))
                rr.counting_h_ok = false;
        }

        std::vector<AuditRecord> records;
        ClusterPartition part;
        if (audit) {
            const BondWeights w = k_star_field(pot);
            rr.k_threshold = cfg.k_policy.kind == KPolicy::Kind::Quantile
                                 ? k_star_quantile(w.k_star, cfg.k_policy.param)
                                 : cfg.k_policy.param;
            part = open_clusters(lat, w.k_star, rr.k_threshold);
            rr.clusters = static_cast<std::int64_t>(part.n_clusters());
            std::vector<LyapunovTable> tables;
            try {
                tables = build_all_tables(pot, part, rr.k_threshold, cfg.enum_cap);
            } catch (const Refusal& e) {
                throw Refusal("replicate " + std::to_string(r) + ": " + e.what());
            }
            const DecompositionReport dec = decomposition_check(pot, part, s0);
            rr.decomposition_rel_err = dec.rel_err;
            const AuditSummary sum = audit_trajectory(pot, part, tables, traj, rr.k_threshold,
                                                      &records);
            rr.audited = true;
            rr.l_initial = sum.l_initial;
            rr.l_final = sum.l_final;
            rr.audit_flips = sum.flips;
            rr.audit_violations = sum.violations();
            rr.capped_flips = sum.capped_flips;
            rr.l_monotone = sum.l_monotone;

            // Lyapunov counting inequality: L(t)-L(0) <= -eps * N(eps) for eps <= 2dK
            const double two_dk = 2.0 * d * rr.k_threshold;
            const double dl = rr.l_final - rr.l_initial;
            for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
                if (cfg.epsilons[i] > two_dk) continue;
                const double bound = -cfg.epsilons[i] * static_cast<double>(stats.totals[i]);
                if (dl > bound + 1e-8 * std::max(1.0, std::abs(bound)))
                    rr.counting_l_ok = false;
            }
        }

        if (emit) {
            char sub[16];
            std::snprintf(sub, sizeof sub, "rep%04d", r);
            const fs::path rd = out / sub;
            fs::create_directories(rd);
            {
                std::ofstream os(rd / "disorder.csv", std::ios::binary);
                write_disorder_csv(os, lat, dis);
            }
            write_file(rd / "events.csv", events_csv(traj));
            write_file(rd / "flips.csv", flips_csv(traj));
            write_file(rd / "trace.csv",
                       trace_csv(pot, traj, rr.h_initial, rr.l_initial, rr.audited,
                                 cfg.trace_stride));
            if (audit) {
                write_file(rd / "clusters.csv", clusters_csv(part));
                write_file(rd / "audit.csv", audit_csv(traj, records));
            }
        }

        report.replicates.push_back(std::move(rr));
    }

    aggregate_report(report);
    if (emit) {
        write_file(out / "replicates.csv", replicates_csv(report, cfg));
        write_file(out / "report.json", report.to_json());
    }
    return report;
}

} // namespace quench
