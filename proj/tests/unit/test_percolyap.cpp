#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "quench/percolyap.hpp"

using namespace quench;

namespace {

DisorderRealization flat_disorder(const TorusLattice& lat, double j, double h) {
    DisorderRealization r;
    r.j.assign(static_cast<std::size_t>(lat.n_bonds()), j);
    r.h.assign(static_cast<std::size_t>(lat.n_sites()), h);
    return r;
}

} // namespace

TEST_CASE("percolyap: k_bond closed forms") {
    // Ising pair potentials: K* = |J|
    for (int rep = 0; rep < 6; ++rep) {
        TorusLattice lat(rep % 2 == 0 ? std::vector<int>{4, 4} : std::vector<int>{9});
        DisorderSpec g = DisorderSpec::from_strings(
            rep % 3 == 0 ? "uniform(-2,3)" : "gaussian(0,1)", "gaussian(0,1)", 300 + rep);
        const auto dis = sample_iid(lat, g);
        Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
        for (std::int64_t id = 0; id < lat.n_bonds(); id += 3) {
            const Bond b = lat.bond(id);
            const double expect = std::abs(dis.j[static_cast<std::size_t>(id)]);
            CHECK(std::abs(k_bond(pot, b.a, b.b) - expect) <= 1e-12);
            CHECK(std::abs(k_bond(pot, b.b, b.a) - expect) <= 1e-12);
        }
    }

    // Potts delta potentials: K* = |J| / 2
    TorusLattice lat({4, 4});
    DisorderSpec g = DisorderSpec::from_strings("gaussian(0,1.5)", "gaussian(0,1)", 42);
    const auto dis = sample_iid(lat, g);
    Potential pot(Potential::Kind::PottsDelta, lat, dis, SpinSpace::potts(3));
    for (std::int64_t id = 0; id < lat.n_bonds(); id += 5) {
        const Bond b = lat.bond(id);
        CHECK(std::abs(k_bond(pot, b.a, b.b) - std::abs(dis.j[static_cast<std::size_t>(id)]) / 2.0) <=
              1e-12);
    }

    // zero coupling decouples the pair
    TorusLattice ring({5});
    const auto zero = flat_disorder(ring, 0.0, 1.0);
    Potential pz(Potential::Kind::IsingPair, ring, zero, SpinSpace::ising());
    CHECK(k_bond(pz, 0, 1) == 0.0);

    CHECK_THROWS_AS(k_bond(pz, 0, 2), UsageError);        // not neighbors
    CHECK_THROWS_AS(k_bond(pz, 0, 1, 4), Refusal);        // budget guard
}

TEST_CASE("percolyap: ring cluster example") {
    TorusLattice lat({5});
    // bonds (i, i+1): K* = 2, 0.5, 3, 0.2, 1.5
    std::vector<double> ks = {2.0, 0.5, 3.0, 0.2, 1.5};
    const ClusterPartition part = open_clusters(lat, ks, 1.0);
    REQUIRE(part.n_clusters() == 2);
    CHECK(part.cluster_of[0] == part.cluster_of[1]);
    CHECK(part.cluster_of[0] == part.cluster_of[4]);
    CHECK(part.cluster_of[2] == part.cluster_of[3]);
    CHECK(part.cluster_of[0] != part.cluster_of[2]);
    CHECK(part.members[0] == std::vector<Site>{0, 1, 4});
    CHECK(part.members[1] == std::vector<Site>{2, 3});

    // K past the extremes
    CHECK(open_clusters(lat, ks, 3.0).n_clusters() == 5);
    CHECK(open_clusters(lat, ks, 0.1).n_clusters() == 1);
}

TEST_CASE("percolyap: union-find equals BFS flood fill") {
    Rng meta(12345, Stream::Meta);
    for (int rep = 0; rep < 100; ++rep) {
        TorusLattice lat(rep % 2 == 0 ? std::vector<int>{6, 6} : std::vector<int>{30});
        std::vector<double> ks(static_cast<std::size_t>(lat.n_bonds()));
        for (double& k : ks) k = meta.u01();
        const double threshold = 0.5;

        const ClusterPartition part = open_clusters(lat, ks, threshold);
        const auto brute = oracle::bfs_clusters(lat, ks, threshold);

        REQUIRE(part.n_clusters() == brute.size());
        std::set<std::vector<Site>> a(part.members.begin(), part.members.end());
        std::set<std::vector<Site>> b(brute.begin(), brute.end());
        CHECK(a == b);

        // closures contain the members and respect the size bound
        for (std::size_t c = 0; c < part.n_clusters(); ++c) {
            CHECK(std::includes(part.closures[c].begin(), part.closures[c].end(),
                                part.members[c].begin(), part.members[c].end()));
            CHECK(part.closures[c].size() <=
                  (2 * static_cast<std::size_t>(lat.dim()) + 1) * part.members[c].size());
        }
    }
}

TEST_CASE("percolyap: capped cumulative map worked example") {
    // distinct V values {-10,-2,0,3} with cap 4dK = 4 map to {0,4,6,9}
    const LyapunovTable t = make_capped_table({3.0, -10.0, 0.0, -2.0}, 4.0);
    REQUIRE(t.levels == std::vector<double>{-10.0, -2.0, 0.0, 3.0});
    CHECK(t.lvalues == std::vector<double>{0.0, 4.0, 6.0, 9.0});
    CHECK(t.value(-10.0) == 0.0);
    CHECK(t.value(3.0) == 9.0);
    CHECK(t.bound() == doctest::Approx(12.0));
    CHECK_THROWS_AS(t.value(1.0), UsageError);

    // all values equal: the map is identically zero
    const LyapunovTable z = make_capped_table({1.25, 1.25, 1.25}, 4.0);
    CHECK(z.levels.size() == 1);
    CHECK(z.value(1.25) == 0.0);

    // a jump of 8 >= cap contributes exactly the cap
    CHECK(t.value(-2.0) - t.value(-10.0) == doctest::Approx(4.0));
}

TEST_CASE("percolyap: table properties on sampled clusters") {
    Rng meta(777, Stream::Meta);
    int checked_tables = 0;
    for (int rep = 0; rep < 10; ++rep) {
        TorusLattice lat({10});
        DisorderSpec g = DisorderSpec::from_strings("gaussian(0,1)", "gaussian(0,0.3)", 500 + rep);
        const auto dis = sample_iid(lat, g);
        Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
        const BondWeights w = k_star_field(pot);
        const double k = k_star_quantile(w.k_star, 0.7);
        const ClusterPartition part = open_clusters(lat, w.k_star, k);
        const auto tables = build_all_tables(pot, part, k);

        const double four_dk = 4.0 * lat.dim() * k;
        for (std::size_t c = 0; c < part.n_clusters(); ++c) {
            const LyapunovTable& t = tables[c];
            REQUIRE(!t.levels.empty());
            CHECK(t.lvalues.front() == 0.0);
            for (std::size_t i = 1; i < t.levels.size(); ++i) {
                CHECK(t.levels[i] - t.levels[i - 1] > kZeroTol); // strictly increasing levels
                CHECK(t.lvalues[i] > t.lvalues[i - 1]);          // strictly increasing map
                CHECK(t.lvalues[i] - t.lvalues[i - 1] <= four_dk * 1.0000001);
            }
            CHECK(t.lvalues.back() <=
                  four_dk * static_cast<double>(t.levels.size() - 1) + 1e-9);
            ++checked_tables;

            // lookups hit for random configurations of the closure
            SpinConfig s = oracle::random_config(lat, SpinSpace::ising(),
                                                 9000 + static_cast<std::uint64_t>(meta.next() % 1000));
            CHECK_NOTHROW(t.value(cluster_energy(pot, part.members[c], s)));
        }
    }
    CHECK(checked_tables > 20);
}

TEST_CASE("percolyap: enumeration refusal names the cluster") {
    TorusLattice lat({6, 6});
    const auto dis = flat_disorder(lat, 1.0, 0.0);
    Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
    const BondWeights w = k_star_field(pot);
    const ClusterPartition part = open_clusters(lat, w.k_star, 0.5); // one giant cluster
    REQUIRE(part.n_clusters() == 1);
    try {
        build_lyapunov(pot, part, 0, 0.5, 1000);
        FAIL("expected Refusal");
    } catch (const Refusal& e) {
        const std::string msg = e.what();
        CHECK(msg.find("size 36") != std::string::npos);
        CHECK(msg.find("cap 1000") != std::string::npos);
    }
}

TEST_CASE("percolyap: cluster decomposition reproduces the Hamiltonian") {
    for (int rep = 0; rep < 20; ++rep) {
        TorusLattice lat({5, 5});
        DisorderSpec g = DisorderSpec::from_strings("gaussian(0,2)", "gaussian(0,1)", 600 + rep);
        const auto dis = sample_iid(lat, g);
        Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
        const BondWeights w = k_star_field(pot);
        const ClusterPartition part = open_clusters(lat, w.k_star, k_star_quantile(w.k_star, 0.8));
        for (int cfg = 0; cfg < 5; ++cfg) {
            const SpinConfig s = oracle::random_config(lat, SpinSpace::ising(),
                                                       700 + static_cast<std::uint64_t>(rep * 10 + cfg));
            const DecompositionReport dec = decomposition_check(pot, part, s);
            CHECK(dec.ok);
        }
    }
}

TEST_CASE("percolyap: eval_l stays within the per-table bounds") {
    TorusLattice lat({12});
    DisorderSpec g = DisorderSpec::from_strings("uniform(-1,2)", "zero", 888);
    const auto dis = sample_iid(lat, g);
    Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
    const BondWeights w = k_star_field(pot);
    const double k = k_star_quantile(w.k_star, 0.75);
    const ClusterPartition part = open_clusters(lat, w.k_star, k);
    const auto tables = build_all_tables(pot, part, k);

    double bound = 0.0;
    for (const auto& t : tables) bound += t.max_value();
    for (int cfg = 0; cfg < 20; ++cfg) {
        const double l = eval_l(pot, part, tables,
                                oracle::random_config(lat, SpinSpace::ising(), 900 + cfg));
        CHECK(l >= -1e-12);
        CHECK(l <= bound + 1e-9);
    }
}

TEST_CASE("percolyap: audit of a zero-energy wall move") {
    TorusLattice lat({6});
    const auto dis = flat_disorder(lat, 1.0, 0.0);
    Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
    const BondWeights w = k_star_field(pot);
    CHECK(w.k_star[0] == doctest::Approx(1.0));
    const double k = 1.0; // K* == 1 everywhere, so K = 1 gives all-singleton clusters
    const ClusterPartition part = open_clusters(lat, w.k_star, k);
    REQUIRE(part.n_clusters() == 6);
    const auto tables = build_all_tables(pot, part, k);

    SpinConfig s(lat, SpinSpace::ising(), +1);
    s.set(3, -1);
    s.set(4, -1);
    s.set(5, -1); // + + + - - -, walls between 2|3 and 5|0
    REQUIRE(pot.delta(3, s, +1) == 0.0);

    const AuditRecord rec = audit_flip(pot, part, tables, s, 3, +1, k);
    CHECK(rec.delta_h == 0.0);
    CHECK(std::abs(rec.delta_l) <= kZeroTol);
    CHECK(rec.ok());
    CHECK(s.spin(3) == -1); // config restored
}

TEST_CASE("percolyap: audit of a heavy-bond capped drop") {
    TorusLattice lat({3});
    auto dis = flat_disorder(lat, 0.1, 0.0);
    dis.j[0] = 10.0; // bond 0-1 dominates
    Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
    const BondWeights w = k_star_field(pot);
    const double k = 1.0;
    const ClusterPartition part = open_clusters(lat, w.k_star, k);
    REQUIRE(part.n_clusters() == 2); // {0,1} and {2}
    const auto tables = build_all_tables(pot, part, k);

    SpinConfig s(lat, SpinSpace::ising(), +1);
    s.set(1, -1); // the heavy bond is violated
    const double dh = pot.delta(1, s, +1);
    const double two_dk = 2.0 * lat.dim() * k;
    REQUIRE(dh <= -2.0 * two_dk); // drop past the cap

    const AuditRecord rec = audit_flip(pot, part, tables, s, 1, +1, k);
    CHECK_FALSE(rec.linear_regime);
    CHECK(rec.delta_l <= -two_dk + 1e-9);
    CHECK(rec.delta_h <= -two_dk + 1e-9);
    CHECK(rec.ok());

    // an energy-raising move is not auditable
    SpinConfig ground(lat, SpinSpace::ising(), +1);
    CHECK_THROWS_AS(audit_flip(pot, part, tables, ground, 1, -1, k), UsageError);
}

TEST_CASE("percolyap: full-trajectory audit with per-flip contracts") {
    TorusLattice lat({8, 8});
    DisorderSpec g = DisorderSpec::from_strings("gaussian(0,1)", "zero", 1212);
    const auto dis = sample_iid(lat, g);
    Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
    const SpinConfig s0 = init_config_lambda(lat, 0.5, 1213);
    Trajectory traj = run(pot, RuleKind::GlauberZeroT, s0, {1e5, 100000, 1214});
    REQUIRE(!traj.events.empty());

    const BondWeights w = k_star_field(pot);
    const double k = k_star_quantile(w.k_star, 0.9);
    const ClusterPartition part = open_clusters(lat, w.k_star, k);
    const auto tables = build_all_tables(pot, part, k);

    std::vector<AuditRecord> recs;
    const AuditSummary sum = audit_trajectory(pot, part, tables, traj, k, &recs);
    CHECK(sum.flips == static_cast<std::int64_t>(traj.events.size()));
    CHECK(sum.violations() == 0);
    CHECK(sum.l_monotone);
    CHECK(sum.l_initial >= 0.0);
    CHECK(sum.l_final >= -1e-9);
    CHECK(sum.l_replay_err <= 1e-8 * std::max(1.0, std::abs(sum.l_final)));
    for (std::size_t i = 0; i < recs.size(); ++i)
        CHECK(traj.events[i].delta_l == recs[i].delta_l);

    // oracle: the audited delta_l matches a full eval_l recomputation per flip
    SpinConfig s = traj.initial;
    double l_prev = eval_l(pot, part, tables, s);
    for (std::size_t i = 0; i < std::min<std::size_t>(traj.events.size(), 50); ++i) {
        s.set(traj.events[i].site, traj.events[i].new_value);
        const double l_now = eval_l(pot, part, tables, s);
        CHECK(std::abs((l_now - l_prev) - recs[i].delta_l) <=
              1e-9 * std::max(1.0, std::abs(l_now)));
        l_prev = l_now;
    }
}

TEST_CASE("percolyap: exponential-moment diagnostic") {
    TorusLattice lat({16, 16});
    const double alpha = 5.0 * std::log(2.0);

    // all singletons: mean is exactly e^alpha and the estimate is stable
    std::vector<std::int64_t> ones(120, 1);
    const ExpMomentReport r1 = exp_moment_diagnostic(ones, alpha);
    CHECK(r1.mean == doctest::Approx(std::exp(alpha)).epsilon(1e-12));
    CHECK(r1.stable);

    // one giant cluster per partition: overflow reads unstable
    std::vector<std::int64_t> giants(120, lat.n_sites());
    const ExpMomentReport r2 = exp_moment_diagnostic(giants, alpha);
    CHECK(r2.overflowed);
    CHECK_FALSE(r2.stable);

    std::vector<std::int64_t> few(20, 1);
    CHECK_THROWS_AS(exp_moment_diagnostic(few, alpha), UsageError);

    // partitions overload: K above every K* makes each C_0 a singleton
    DisorderSpec g = DisorderSpec::from_strings("uniform(0,1)", "zero", 5150);
    std::vector<ClusterPartition> parts;
    for (int r = 0; r < 110; ++r) {
        DisorderSpec s = g;
        s.seed = derive_seed(5150, Stream::Replicate, static_cast<std::uint64_t>(r));
        const auto dis = sample(lat, s);
        Potential pot(Potential::Kind::IsingPair, lat, dis, SpinSpace::ising());
        parts.push_back(open_clusters(lat, k_star_field(pot).k_star, 1.5));
    }
    const ExpMomentReport r3 = exp_moment_diagnostic(parts, alpha);
    CHECK(r3.mean == doctest::Approx(std::exp(alpha)).epsilon(1e-12));
    CHECK(r3.stable);
}

TEST_CASE("percolyap: 1d tail matches the exact formula") {
    // enumeration cross-check of the frozen formula on the 3-ring: summing the
    // probability of every open/closed bond pattern reproduces 1 - (1-p)^2
    {
        TorusLattice ring({3});
        const double p = 0.37;
        double prob_ge_2 = 0.0;
        for (int mask = 0; mask < 8; ++mask) {
            std::vector<double> ks(3);
            double weight = 1.0;
            for (int b = 0; b < 3; ++b) {
                const bool open = (mask >> b) & 1;
                ks[static_cast<std::size_t>(b)] = open ? 1.0 : 0.0;
                weight *= open ? p : 1.0 - p;
            }
            const ClusterPartition part = open_clusters(ring, ks, 0.5);
            const std::int32_t c0 = part.cluster_of[0];
            if (part.members[static_cast<std::size_t>(c0)].size() >= 2) prob_ge_2 += weight;
        }
        CHECK(prob_ge_2 == doctest::Approx(1.0 - (1.0 - p) * (1.0 - p)).epsilon(1e-12));
    }

    TorusLattice lat(std::vector<int>{100});
    DisorderSpec u = DisorderSpec::from_strings("uniform(0,1)", "zero", 31415);
    const double ks[2] = {0.6, 0.8};
    const auto fits = cluster_tail(lat, Potential::Kind::IsingPair, SpinSpace::ising(), u, ks, 60,
                                   31415);
    REQUIRE(fits.size() == 2);

    // P(|C_0| > 1) = 1 - (1-p)^2 with p = P(|J| > K) = 1 - K
    for (const TailFit& f : fits) {
        const double p = 1.0 - f.k;
        const double expect = 1.0 - (1.0 - p) * (1.0 - p);
        REQUIRE(!f.exceed_counts.empty());
        const double got = static_cast<double>(f.exceed_counts[0]) / static_cast<double>(f.samples);
        CHECK(std::abs(got - expect) < 0.05);
    }
    // subcritical decay rates grow with K
    CHECK(fits[0].fitted);
    CHECK(fits[1].fitted);
    CHECK(fits[0].lambda_hat > 0.0);
    CHECK(fits[1].lambda_hat > fits[0].lambda_hat);
    CHECK_FALSE(fits[1].spanning_warning);

    // threshold above every K*: all singletons, no tail support, no fit
    DisorderSpec c = DisorderSpec::from_strings("constant(1)", "zero", 1);
    const double high[1] = {2.0};
    const auto none = cluster_tail(lat, Potential::Kind::IsingPair, SpinSpace::ising(), c, high,
                                   5, 1);
    REQUIRE(none.size() == 1);
    CHECK_FALSE(none[0].fitted);
    CHECK(none[0].exceed_counts.empty()); // P(|C_0| > 1) = 0
    for (std::int64_t sz : none[0].origin_sizes) CHECK(sz == 1);

    // threshold below K*: the whole torus is one spanning cluster
    const double low[1] = {0.5};
    const auto giant = cluster_tail(lat, Potential::Kind::IsingPair, SpinSpace::ising(), c, low,
                                    2, 1);
    CHECK(giant[0].spanning_warning);
}
