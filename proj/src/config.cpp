#include <cmath>
#include <cstdio>
#include <sstream>

#include "quench/harness.hpp"

namespace quench {

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::Simulate: return "simulate";
        case RunMode::Percolation: return "percolation";
        case RunMode::Audit: return "lyapunov-audit";
        case RunMode::Classify: return "classify";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& tok : split_commas(s)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw UsageError("config: bad number '" + tok + "' for key " + key);
        }
    }
    return out;
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
    try {
        return std::stoll(s);
    } catch (const std::exception&) {
        throw UsageError("config: bad integer '" + s + "' for key " + key);
    }
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join17(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt17(v[i]);
    }
    return out;
}

} // namespace

std::string KPolicy::to_text() const {
    return (kind == Kind::Quantile ? "quantile(" : "value(") + fmt17(param) + ")";
}

KPolicy KPolicy::parse(const std::string& s) {
    KPolicy p;
    const auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')')
        throw UsageError("config: bad k.policy '" + s + "', want quantile(q) or value(x)");
    const std::string name = s.substr(0, open);
    const std::string arg = s.substr(open + 1, s.size() - open - 2);
    try {
        p.param = std::stod(arg);
    } catch (const std::exception&) {
        throw UsageError("config: bad k.policy argument '" + arg + "'");
    }
    if (name == "quantile") {
        p.kind = Kind::Quantile;
        if (p.param < 0.0 || p.param > 1.0)
            throw UsageError("config: quantile must be in [0,1]");
    } else if (name == "value") {
        p.kind = Kind::Value;
        if (p.param < 0.0) throw UsageError("config: k value must be >= 0");
    } else {
        throw UsageError("config: unknown k.policy '" + name + "'");
    }
    return p;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    bool have_dims = false, have_coupling = false, have_seed = false;
    std::string coupling_law = "constant(1)";
    std::string field_law = "zero";
    std::uint64_t disorder_seed = 0;
    bool have_disorder_seed = false;
    double lambda = 0.5;
    bool have_lambda = false, have_weights = false;

    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (val.empty())
            throw UsageError("config line " + std::to_string(line_no) + ": empty value for " + key);

        if (key == "lattice.dims") {
            cfg.dims.clear();
            for (const auto& tok : split_commas(val))
                cfg.dims.push_back(static_cast<int>(parse_int(tok, key)));
            have_dims = true;
        } else if (key == "spin") {
            if (val == "ising") {
                cfg.space = SpinSpace::ising();
            } else if (val.rfind("potts(", 0) == 0 && val.back() == ')') {
                cfg.space = SpinSpace::potts(
                    static_cast<int>(parse_int(val.substr(6, val.size() - 7), key)));
            } else {
                throw UsageError("config: spin must be ising or potts(Q), got '" + val + "'");
            }
        } else if (key == "disorder.coupling") {
            coupling_law = val;
            have_coupling = true;
        } else if (key == "disorder.field") {
            field_law = val;
        } else if (key == "disorder.seed") {
            disorder_seed = static_cast<std::uint64_t>(parse_int(val, key));
            have_disorder_seed = true;
        } else if (key == "rule") {
            cfg.rule = parse_rule(val);
        } else if (key == "init.lambda") {
            lambda = std::stod(val);
            have_lambda = true;
        } else if (key == "init.weights") {
            cfg.init_weights = parse_doubles(val, key);
            have_weights = true;
        } else if (key == "t_max") {
            cfg.t_max = std::stod(val);
        } else if (key == "event_cap") {
            cfg.event_cap = parse_int(val, key);
        } else if (key == "epsilons") {
            cfg.epsilons = parse_doubles(val, key);
        } else if (key == "k.policy") {
            cfg.k_policy = KPolicy::parse(val);
        } else if (key == "enum_cap") {
            cfg.enum_cap = parse_int(val, key);
        } else if (key == "replicates") {
            cfg.replicates = static_cast<int>(parse_int(val, key));
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_int(val, key));
            have_seed = true;
        } else if (key == "out") {
            cfg.out_dir = val;
        } else if (key == "trace.stride") {
            cfg.trace_stride = static_cast<int>(parse_int(val, key));
        } else if (key == "tail.samples") {
            cfg.tail_samples = static_cast<int>(parse_int(val, key));
        } else if (key == "tail.ks") {
            cfg.tail_ks = parse_doubles(val, key);
        } else if (key == "windows") {
            cfg.windows = static_cast<int>(parse_int(val, key));
        } else {
            throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
        }
    }

    if (!have_dims) throw UsageError("config: lattice.dims is required");
    if (!have_coupling) throw UsageError("config: disorder.coupling is required");
    if (!have_seed) throw UsageError("config: seed is required");

    cfg.disorder = DisorderSpec::from_strings(coupling_law, field_law,
                                              have_disorder_seed ? disorder_seed : 0);
    cfg.disorder_seed_fixed = have_disorder_seed;

    if (have_weights) {
        if (have_lambda) throw UsageError("config: give init.lambda or init.weights, not both");
    } else if (cfg.space.kind == SpinSpace::Kind::Ising) {
        cfg.init_weights = {1.0 - lambda, lambda};
    } else {
        if (have_lambda) throw UsageError("config: init.lambda is Ising-only; use init.weights");
        cfg.init_weights.assign(static_cast<std::size_t>(cfg.space.size()),
                                1.0 / cfg.space.size());
    }

    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    TorusLattice lat(dims); // validates dims
    disorder.validate();
    if (static_cast<int>(init_weights.size()) != space.size())
        throw UsageError("config: init.weights size must equal |S0|");
    double sum = 0.0;
    for (double w : init_weights) {
        if (!(w >= 0.0)) throw UsageError("config: init weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw UsageError("config: init weights must sum to 1");
    if (!(t_max > 0.0)) throw UsageError("config: t_max must be > 0");
    if (event_cap < 1) throw UsageError("config: event_cap must be >= 1");
    if (replicates < 0) throw UsageError("config: replicates must be >= 0");
    if (enum_cap < 1) throw UsageError("config: enum_cap must be >= 1");
    if (windows < 2) throw UsageError("config: windows must be >= 2");
    if (tail_samples < 1) throw UsageError("config: tail.samples must be >= 1");
    if (trace_stride < 0) throw UsageError("config: trace.stride must be >= 0");
    for (double e : epsilons)
        if (!(e >= 0.0)) throw UsageError("config: epsilons must be >= 0");
    for (double kk : tail_ks)
        if (!(kk >= 0.0)) throw UsageError("config: tail.ks must be >= 0");
    if (rule == RuleKind::GlauberZeroT && space.kind != SpinSpace::Kind::Ising)
        throw UsageError("config: rule glauber needs spin = ising");
}

std::string ExperimentConfig::to_text() const {
    std::string s;
    s += "lattice.dims = ";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(dims[i]);
    }
    s += '\n';
    s += "spin = ";
    s += (space.kind == SpinSpace::Kind::Ising ? "ising"
                                               : "potts(" + std::to_string(space.q) + ")");
    s += '\n';
    s += "disorder.coupling = " + disorder.coupling_str() + '\n';
    s += "disorder.field = " + disorder.field_str() + '\n';
    if (disorder_seed_fixed)
        s += "disorder.seed = " + std::to_string(disorder.seed) + '\n';
    s += std::string("rule = ") + to_string(rule) + '\n';
    s += "init.weights = " + join17(init_weights) + '\n';
    s += "t_max = " + fmt17(t_max) + '\n';
    s += "event_cap = " + std::to_string(event_cap) + '\n';
    s += "epsilons = " + join17(epsilons) + '\n';
    s += "k.policy = " + k_policy.to_text() + '\n';
    s += "enum_cap = " + std::to_string(enum_cap) + '\n';
    s += "replicates = " + std::to_string(replicates) + '\n';
    s += "seed = " + std::to_string(seed) + '\n';
    if (!out_dir.empty()) s += "out = " + out_dir + '\n';
    s += "trace.stride = " + std::to_string(trace_stride) + '\n';
    s += "tail.samples = " + std::to_string(tail_samples) + '\n';
    if (!tail_ks.empty()) s += "tail.ks = " + join17(tail_ks) + '\n';
    s += "windows = " + std::to_string(windows) + '\n';
    return s;
}

} // namespace quench
