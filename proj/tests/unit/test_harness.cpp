#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quench/harness.hpp"

using namespace quench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* kBaseCfg =
    "# demo experiment\n"
    "lattice.dims = 8,8\n"
    "disorder.coupling = gaussian(0,1)\n"
    "disorder.field = zero\n"
    "rule = glauber\n"
    "init.lambda = 0.5\n"
    "t_max = 200\n"
    "event_cap = 100000\n"
    "epsilons = 0,0.5,1\n"
    "replicates = 3\n"
    "seed = 11\n";

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream is(p);
    REQUIRE(is);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) row.push_back(tok);
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("harness: config parse, validation, canonical round-trip") {
    const ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    CHECK(cfg.dims == std::vector<int>{8, 8});
    CHECK(cfg.rule == RuleKind::GlauberZeroT);
    CHECK(cfg.replicates == 3);
    CHECK(cfg.seed == 11);
    CHECK(cfg.epsilons == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(cfg.init_weights == std::vector<double>{0.5, 0.5});

    const std::string canon = cfg.to_text();
    const std::string canon2 = ExperimentConfig::parse(canon).to_text();
    CHECK(canon == canon2);

    CHECK_THROWS_AS(ExperimentConfig::parse("lattice.dims = 8\nseed = 1\n"), UsageError);
    CHECK_THROWS_AS(ExperimentConfig::parse(std::string(kBaseCfg) + "bogus.key = 1\n"),
                    UsageError);
    CHECK_THROWS_AS(ExperimentConfig::parse(std::string(kBaseCfg) + "rule = occupation\nspin = potts(3)\ninit.lambda = 0.2\n"),
                    UsageError); // lambda is Ising-only
    CHECK_THROWS_AS(ExperimentConfig::parse(std::string(kBaseCfg) + "k.policy = quantile(2)\n"),
                    UsageError);
}

TEST_CASE("harness: zero replicates produce an empty report and no files") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.replicates = 0;
    const fs::path out = fresh_dir("quench_zero_rep");
    cfg.out_dir = out.string();
    const ExperimentReport rep = run_experiment(cfg, RunMode::Simulate);
    CHECK(rep.replicates.empty());
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("harness: gaussian d=2 experiment fixates and is byte-reproducible") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {16, 16};
    cfg.replicates = 5;
    const fs::path out_a = fresh_dir("quench_rep_a");
    const fs::path out_b = fresh_dir("quench_rep_b");

    cfg.out_dir = out_a.string();
    const ExperimentReport a = run_experiment(cfg, RunMode::Simulate);
    cfg.out_dir = out_b.string();
    const ExperimentReport b = run_experiment(cfg, RunMode::Simulate);

    REQUIRE(a.replicates.size() == 5);
    for (const ReplicateReport& r : a.replicates) {
        CHECK(r.end_reason == EndReason::Absorbed);
        CHECK(r.telescope_err <= 1e-8);
        CHECK(r.max_delta_h <= kZeroTol);
        CHECK(r.counting_h_ok);
    }
    CHECK(a.absorbed_fraction == 1.0);

    for (const char* f : {"replicates.csv", "rep0000/events.csv", "rep0002/events.csv",
                          "rep0001/disorder.csv", "rep0000/trace.csv", "rep0000/flips.csv"})
        CHECK(slurp(out_a / f) == slurp(out_b / f));

    // identical config (including out) reproduces report.json byte for byte
    const std::string json_a = slurp(out_a / "report.json");
    fs::remove_all(out_a);
    cfg.out_dir = out_a.string();
    const ExperimentReport a2 = run_experiment(cfg, RunMode::Simulate);
    CHECK(json_a == slurp(out_a / "report.json"));
    CHECK(a2.to_json() == json_a);

    // distinct replicates see distinct quenched disorder
    CHECK(slurp(out_a / "rep0000/disorder.csv") != slurp(out_a / "rep0001/disorder.csv"));

    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

TEST_CASE("harness: aggregates recompute exactly from the replicate rows") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {10, 10};
    cfg.replicates = 4;
    const fs::path out = fresh_dir("quench_agg");
    cfg.out_dir = out.string();
    const ExperimentReport rep = run_experiment(cfg, RunMode::Simulate);

    const auto rows = read_csv(out / "replicates.csv");
    REQUIRE(rows.size() == 5); // header + 4 rows
    const auto& header = rows[0];
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        REQUIRE(false);
        return std::size_t{0};
    };

    ExperimentReport redone;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        ReplicateReport r;
        const auto& row = rows[i];
        r.end_reason = row[col("end_reason")] == "absorbed" ? EndReason::Absorbed
                        : row[col("end_reason")] == "t_max" ? EndReason::TMax
                                                            : EndReason::EventCap;
        r.end_time = std::stod(row[col("end_time")]);
        r.events = std::stoll(row[col("events")]);
        r.overlap = std::stod(row[col("overlap")]);
        r.counting_h_ok = row[col("counting_h_ok")] == "1";
        r.counting_l_ok = row[col("counting_l_ok")] == "1";
        for (double e : cfg.epsilons) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "n_eps_%.17g", e);
            r.eps_totals.push_back(std::stoll(row[col(buf)]));
        }
        for (int wi = 1; wi <= cfg.windows; ++wi)
            r.window_fractions.push_back(std::stod(row[col("w" + std::to_string(wi))]));
        r.audit_violations = std::stoll(row[col("audit_violations")]);
        redone.replicates.push_back(r);
    }
    aggregate_report(redone);

    CHECK(redone.absorbed_fraction == rep.absorbed_fraction);
    CHECK(redone.mean_events == rep.mean_events);
    CHECK(redone.mean_end_time == rep.mean_end_time);
    CHECK(redone.eps_totals_sum == rep.eps_totals_sum);
    CHECK(redone.mean_window_fractions == rep.mean_window_fractions);
    CHECK(redone.mean_overlap == rep.mean_overlap);
    CHECK(redone.label == rep.label);
    CHECK(redone.counting_violations == rep.counting_violations);
    CHECK(redone.audit_violations == rep.audit_violations);

    fs::remove_all(out);
}

TEST_CASE("harness: audit mode emits contract files and passes them") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {6, 6};
    cfg.replicates = 2;
    cfg.k_policy = KPolicy{KPolicy::Kind::Quantile, 0.9};
    const fs::path out = fresh_dir("quench_audit");
    cfg.out_dir = out.string();

    const ExperimentReport rep = run_experiment(cfg, RunMode::Audit);
    for (const ReplicateReport& r : rep.replicates) {
        CHECK(r.audited);
        CHECK(r.audit_violations == 0);
        CHECK(r.l_monotone);
        CHECK(r.counting_l_ok);
        CHECK(r.decomposition_rel_err <= 1e-9);
        CHECK(r.l_final <= r.l_initial + 1e-9);
    }
    CHECK(fs::exists(out / "rep0000/clusters.csv"));
    CHECK(fs::exists(out / "rep0000/audit.csv"));

    // audit csv carries one row per event with a regime tag
    const auto rows = read_csv(out / "rep0000/audit.csv");
    REQUIRE(rows.size() == static_cast<std::size_t>(rep.replicates[0].events) + 1);
    CHECK(rows[0] == std::vector<std::string>{"t", "site", "delta_h", "delta_l", "delta_l_star",
                                              "regime"});
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK((rows[i][5] == "linear" || rows[i][5] == "capped"));

    fs::remove_all(out);
}

TEST_CASE("harness: trace rows bracket the run") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {8, 8};
    cfg.replicates = 1;
    cfg.trace_stride = 10;
    const fs::path out = fresh_dir("quench_trace");
    cfg.out_dir = out.string();
    const ExperimentReport rep = run_experiment(cfg, RunMode::Simulate);

    const auto rows = read_csv(out / "rep0000/trace.csv");
    REQUIRE(rows.size() >= 3);
    CHECK(rows[0] == std::vector<std::string>{"t", "energy_density", "lyapunov_density",
                                              "active_fraction"});
    CHECK(std::stod(rows[1][0]) == 0.0);
    CHECK(rows[1][2].empty()); // lyapunov column empty unless audited
    // absorbed run ends with no active sites and the final energy density
    const auto& last = rows.back();
    CHECK(std::stod(last[3]) == 0.0);
    CHECK(std::stod(last[1]) ==
          doctest::Approx(rep.replicates[0].h_final / 64.0).epsilon(1e-9));
    // energy density is nonincreasing along the trace
    double prev = std::stod(rows[1][1]);
    for (std::size_t i = 2; i < rows.size(); ++i) {
        const double e = std::stod(rows[i][1]);
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
    fs::remove_all(out);
}

TEST_CASE("harness: refusals carry replicate context") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {6, 6};
    cfg.replicates = 1;
    cfg.disorder = DisorderSpec::from_strings("constant(1)", "zero", 0);
    cfg.k_policy = {KPolicy::Kind::Value, 0.5}; // every bond open: 36-site cluster
    try {
        run_experiment(cfg, RunMode::Audit);
        FAIL("expected Refusal");
    } catch (const Refusal& e) {
        const std::string msg = e.what();
        CHECK(msg.find("replicate 0") != std::string::npos);
        CHECK(msg.find("size 36") != std::string::npos);
    }
}

TEST_CASE("harness: percolation mode fits tails") {
    ExperimentConfig cfg = ExperimentConfig::parse(kBaseCfg);
    cfg.dims = {24, 24};
    cfg.disorder = DisorderSpec::from_strings("uniform(0,1)", "zero", 0);
    cfg.tail_ks = {0.7, 0.9};
    cfg.tail_samples = 30;
    const fs::path out = fresh_dir("quench_perc");
    cfg.out_dir = out.string();

    const ExperimentReport rep = run_experiment(cfg, RunMode::Percolation);
    REQUIRE(rep.has_percolation);
    REQUIRE(rep.tail.size() == 2);
    CHECK(rep.tail[0].lambda_hat > 0.0);
    CHECK(rep.tail[1].lambda_hat > rep.tail[0].lambda_hat);
    CHECK(fs::exists(out / "tail.csv"));
    CHECK(fs::exists(out / "clusters.csv"));

    // the tail csv reproduces the fitted exceedance table
    const auto rows = read_csv(out / "tail.csv");
    REQUIRE(rows.size() >= 3);
    fs::remove_all(out);
}

TEST_CASE("harness: cli exit codes") {
    const char* cli = std::getenv("QUENCH_CLI");
    REQUIRE(cli != nullptr);
    const fs::path dir = fresh_dir("quench_cli");
    fs::create_directories(dir);

    {
        std::ofstream os(dir / "ok.cfg");
        os << "lattice.dims = 6,6\ndisorder.coupling = gaussian(0,1)\nseed = 5\n"
           << "replicates = 1\nt_max = 50\nout = " << (dir / "run").string() << "\n";
    }
    {
        std::ofstream os(dir / "refuse.cfg");
        // constant couplings make every bond open below K* = 1: one 36-site cluster
        os << "lattice.dims = 6,6\ndisorder.coupling = constant(1)\nseed = 5\n"
           << "replicates = 1\nt_max = 10\nk.policy = value(0.5)\n";
    }

    auto run_cli = [&](const std::string& args) {
        const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };

    CHECK(run_cli("simulate " + (dir / "ok.cfg").string()) == 0);
    CHECK(fs::exists(dir / "run" / "report.json"));
    CHECK(run_cli("frobnicate " + (dir / "ok.cfg").string()) == 1);
    CHECK(run_cli("simulate /nonexistent.cfg") == 1);
    CHECK(run_cli("lyapunov-audit " + (dir / "refuse.cfg").string()) == 2);
    CHECK(run_cli("simulate") == 1); // missing config argument
    CHECK(run_cli("classify " + (dir / "ok.cfg").string() + " --out " + (dir / "cls").string()) ==
          0);

    // --seed overrides the master seed and changes the trajectory
    CHECK(run_cli("simulate " + (dir / "ok.cfg").string() + " --seed 99 --out " +
                  (dir / "run99").string()) == 0);
    CHECK(slurp(dir / "run" / "rep0000" / "events.csv") !=
          slurp(dir / "run99" / "rep0000" / "events.csv"));

    fs::remove_all(dir);
}
