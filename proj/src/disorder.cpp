#include "quench/disorder.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "quench/numeric.hpp"
#include "quench/rng.hpp"

namespace quench {

namespace {

double draw_coupling(const DisorderSpec& s, Rng& rng) {
    switch (s.coupling) {
        case CouplingLaw::Constant: return s.cp0;
        case CouplingLaw::Gaussian: return rng.normal(s.cp0, s.cp1);
        case CouplingLaw::PmJ: return rng.bernoulli(s.cp1) ? s.cp0 : -s.cp0;
        case CouplingLaw::Uniform: return rng.uniform(s.cp0, s.cp1);
        case CouplingLaw::Cauchy: return rng.cauchy(s.cp0, s.cp1);
        case CouplingLaw::Hopfield: break;
    }
    throw UsageError("disorder: hopfield couplings are not i.i.d., use sample_hopfield");
}

double draw_field(const DisorderSpec& s, Rng& rng) {
    switch (s.field) {
        case FieldLaw::Zero: return 0.0;
        case FieldLaw::Constant: return s.fp0;
        case FieldLaw::Gaussian: return rng.normal(s.fp0, s.fp1);
        case FieldLaw::Pm: return rng.bernoulli(s.fp1) ? s.fp0 : -s.fp0;
    }
    return 0.0;
}

std::vector<double> sample_fields(const TorusLattice& lat, const DisorderSpec& s) {
    std::vector<double> h(static_cast<std::size_t>(lat.n_sites()));
    for (Site x = 0; x < lat.n_sites(); ++x) {
        Rng rng(s.seed, Stream::Field, static_cast<std::uint64_t>(x));
        h[static_cast<std::size_t>(x)] = draw_field(s, rng);
    }
    return h;
}

// "name(a,b)" -> (name, args)
void split_law(const std::string& text, std::string& name, std::vector<double>& args) {
    name.clear();
    args.clear();
    const auto open = text.find('(');
    if (open == std::string::npos) {
        name = text;
        return;
    }
    if (text.back() != ')')
        throw UsageError("disorder: malformed law '" + text + "'");
    name = text.substr(0, open);
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            args.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw UsageError("disorder: bad numeric argument in '" + text + "'");
        }
    }
}

void expect_args(const std::string& law, std::size_t got, std::size_t want) {
    if (got != want)
        throw UsageError("disorder: law '" + law + "' expects " + std::to_string(want) +
                         " argument(s), got " + std::to_string(got));
}

} // namespace

void DisorderSpec::validate() const {
    switch (coupling) {
        case CouplingLaw::Constant: break;
        case CouplingLaw::Gaussian:
            if (!(cp1 > 0)) throw UsageError("disorder: gaussian sigma must be > 0");
            break;
        case CouplingLaw::PmJ:
            if (!(cp0 > 0)) throw UsageError("disorder: pmj J must be > 0");
            if (cp1 < 0 || cp1 > 1) throw UsageError("disorder: pmj alpha must be in [0,1]");
            break;
        case CouplingLaw::Uniform:
            if (!(cp0 < cp1)) throw UsageError("disorder: uniform needs a < b");
            break;
        case CouplingLaw::Cauchy:
            if (!(cp1 > 0)) throw UsageError("disorder: cauchy gamma must be > 0");
            break;
        case CouplingLaw::Hopfield:
            if (hopfield_m < 1) throw UsageError("disorder: hopfield M must be >= 1");
            break;
    }
    switch (field) {
        case FieldLaw::Zero:
        case FieldLaw::Constant: break;
        case FieldLaw::Gaussian:
            if (!(fp1 > 0)) throw UsageError("disorder: field gaussian sigma must be > 0");
            break;
        case FieldLaw::Pm:
            if (fp1 < 0 || fp1 > 1) throw UsageError("disorder: field pm alpha must be in [0,1]");
            break;
    }
    if (!std::isfinite(cp0) || !std::isfinite(cp1) || !std::isfinite(fp0) || !std::isfinite(fp1))
        throw UsageError("disorder: parameters must be finite");
}

std::string DisorderSpec::coupling_str() const {
    char buf[96];
    switch (coupling) {
        case CouplingLaw::Constant: std::snprintf(buf, sizeof buf, "constant(%.17g)", cp0); break;
        case CouplingLaw::Gaussian: std::snprintf(buf, sizeof buf, "gaussian(%.17g,%.17g)", cp0, cp1); break;
        case CouplingLaw::PmJ: std::snprintf(buf, sizeof buf, "pmj(%.17g,%.17g)", cp0, cp1); break;
        case CouplingLaw::Uniform: std::snprintf(buf, sizeof buf, "uniform(%.17g,%.17g)", cp0, cp1); break;
        case CouplingLaw::Cauchy: std::snprintf(buf, sizeof buf, "cauchy(%.17g,%.17g)", cp0, cp1); break;
        case CouplingLaw::Hopfield: std::snprintf(buf, sizeof buf, "hopfield(%d)", hopfield_m); break;
    }
    return buf;
}

std::string DisorderSpec::field_str() const {
    char buf[96];
    switch (field) {
        case FieldLaw::Zero: return "zero";
        case FieldLaw::Constant: std::snprintf(buf, sizeof buf, "constant(%.17g)", fp0); break;
        case FieldLaw::Gaussian: std::snprintf(buf, sizeof buf, "gaussian(%.17g,%.17g)", fp0, fp1); break;
        case FieldLaw::Pm: std::snprintf(buf, sizeof buf, "pm(%.17g,%.17g)", fp0, fp1); break;
    }
    return buf;
}

DisorderSpec DisorderSpec::from_strings(const std::string& coupling, const std::string& field,
                                        std::uint64_t seed) {
    DisorderSpec s;
    s.seed = seed;
    std::string name;
    std::vector<double> a;

    split_law(coupling, name, a);
    if (name == "constant") {
        expect_args(coupling, a.size(), 1);
        s.coupling = CouplingLaw::Constant;
        s.cp0 = a[0];
    } else if (name == "gaussian") {
        expect_args(coupling, a.size(), 2);
        s.coupling = CouplingLaw::Gaussian;
        s.cp0 = a[0];
        s.cp1 = a[1];
    } else if (name == "pmj") {
        expect_args(coupling, a.size(), 2);
        s.coupling = CouplingLaw::PmJ;
        s.cp0 = a[0];
        s.cp1 = a[1];
    } else if (name == "uniform") {
        expect_args(coupling, a.size(), 2);
        s.coupling = CouplingLaw::Uniform;
        s.cp0 = a[0];
        s.cp1 = a[1];
    } else if (name == "cauchy") {
        expect_args(coupling, a.size(), 2);
        s.coupling = CouplingLaw::Cauchy;
        s.cp0 = a[0];
        s.cp1 = a[1];
    } else if (name == "hopfield") {
        expect_args(coupling, a.size(), 1);
        s.coupling = CouplingLaw::Hopfield;
        s.hopfield_m = static_cast<int>(a[0]);
    } else {
        throw UsageError("disorder: unknown coupling law '" + coupling + "'");
    }

    split_law(field, name, a);
    if (name == "zero") {
        s.field = FieldLaw::Zero;
    } else if (name == "constant") {
        expect_args(field, a.size(), 1);
        s.field = FieldLaw::Constant;
        s.fp0 = a[0];
    } else if (name == "gaussian") {
        expect_args(field, a.size(), 2);
        s.field = FieldLaw::Gaussian;
        s.fp0 = a[0];
        s.fp1 = a[1];
    } else if (name == "pm") {
        expect_args(field, a.size(), 2);
        s.field = FieldLaw::Pm;
        s.fp0 = a[0];
        s.fp1 = a[1];
    } else {
        throw UsageError("disorder: unknown field law '" + field + "'");
    }

    s.validate();
    return s;
}

DisorderRealization sample_iid(const TorusLattice& lat, const DisorderSpec& spec) {
    spec.validate();
    if (spec.coupling == CouplingLaw::Hopfield)
        throw UsageError("disorder: hopfield couplings are not i.i.d., use sample_hopfield");
    DisorderRealization r;
    r.spec = spec;
    r.j.resize(static_cast<std::size_t>(lat.n_bonds()));
    for (std::int64_t b = 0; b < lat.n_bonds(); ++b) {
        Rng rng(spec.seed, Stream::Coupling, static_cast<std::uint64_t>(b));
        r.j[static_cast<std::size_t>(b)] = draw_coupling(spec, rng);
    }
    r.h = sample_fields(lat, spec);
    return r;
}

DisorderRealization sample_hopfield(const TorusLattice& lat, int m, std::uint64_t seed,
                                    FieldLaw field, double fp0, double fp1) {
    DisorderSpec spec;
    spec.coupling = CouplingLaw::Hopfield;
    spec.hopfield_m = m;
    spec.field = field;
    spec.fp0 = fp0;
    spec.fp1 = fp1;
    spec.seed = seed;
    spec.validate();

    // i.i.d. +-1 patterns per site; J_{x,y} = sum_i xi_x^(i) xi_y^(i)
    std::vector<std::vector<int>> xi(static_cast<std::size_t>(lat.n_sites()));
    for (Site x = 0; x < lat.n_sites(); ++x) {
        Rng rng(seed, Stream::HopfieldPattern, static_cast<std::uint64_t>(x));
        xi[static_cast<std::size_t>(x)].resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            xi[static_cast<std::size_t>(x)][static_cast<std::size_t>(i)] = rng.pm_one();
    }

    DisorderRealization r;
    r.spec = spec;
    r.j.resize(static_cast<std::size_t>(lat.n_bonds()));
    for (std::int64_t bid = 0; bid < lat.n_bonds(); ++bid) {
        const Bond b = lat.bond(bid);
        int acc = 0;
        for (int i = 0; i < m; ++i)
            acc += xi[static_cast<std::size_t>(b.a)][static_cast<std::size_t>(i)] *
                   xi[static_cast<std::size_t>(b.b)][static_cast<std::size_t>(i)];
        r.j[static_cast<std::size_t>(bid)] = static_cast<double>(acc);
    }
    r.h = sample_fields(lat, spec);
    return r;
}

DisorderRealization sample(const TorusLattice& lat, const DisorderSpec& spec) {
    if (spec.coupling == CouplingLaw::Hopfield)
        return sample_hopfield(lat, spec.hopfield_m, spec.seed, spec.field, spec.fp0, spec.fp1);
    return sample_iid(lat, spec);
}

FiniteMeanReport finite_mean_diagnostic(std::span<const DisorderRealization> realizations) {
    if (realizations.empty())
        throw UsageError("finite_mean_diagnostic: need at least one realization");
    FiniteMeanReport rep;
    NeumaierSum sum;
    for (const auto& r : realizations)
        for (double v : r.j) {
            const double a = std::abs(v);
            sum.add(a);
            if (a > rep.max_abs_j) rep.max_abs_j = a;
            ++rep.samples;
        }
    const double total = sum.value();
    rep.mean_abs_j = rep.samples > 0 ? total / static_cast<double>(rep.samples) : 0.0;
    rep.max_over_sum = total > 0 ? rep.max_abs_j / total : 0.0;
    rep.heavy_tail_warning = rep.max_over_sum > kHeavyTailShare;
    return rep;
}

void write_disorder_csv(std::ostream& os, const TorusLattice& lat,
                        const DisorderRealization& r) {
    char buf[64];
    os << "kind,id_a,id_b,value\n";
    for (std::int64_t bid = 0; bid < lat.n_bonds(); ++bid) {
        const Bond b = lat.bond(bid);
        std::snprintf(buf, sizeof buf, "%.17g", r.j[static_cast<std::size_t>(bid)]);
        os << "J," << b.a << ',' << b.b << ',' << buf << '\n';
    }
    for (Site x = 0; x < lat.n_sites(); ++x) {
        std::snprintf(buf, sizeof buf, "%.17g", r.h[static_cast<std::size_t>(x)]);
        os << "h," << x << ",," << buf << '\n';
    }
}

namespace {

std::int64_t bond_id_of_pair(const TorusLattice& lat, Site a, Site b) {
    const auto nb = lat.neighbors(a);
    for (int k = 0; k < static_cast<int>(nb.size()); ++k)
        if (nb[k] == b) {
            const int axis = k / 2;
            return (k % 2 == 0) ? lat.bond_id(a, axis) : lat.bond_id(b, axis);
        }
    throw UsageError("disorder csv: sites " + std::to_string(a) + "," + std::to_string(b) +
                     " are not lattice neighbors");
}

} // namespace

DisorderRealization read_disorder_csv(std::istream& is, const TorusLattice& lat) {
    DisorderRealization r;
    r.j.assign(static_cast<std::size_t>(lat.n_bonds()), 0.0);
    r.h.assign(static_cast<std::size_t>(lat.n_sites()), 0.0);
    std::vector<bool> got_j(static_cast<std::size_t>(lat.n_bonds()), false);
    std::vector<bool> got_h(static_cast<std::size_t>(lat.n_sites()), false);

    std::string line;
    if (!std::getline(is, line) || line != "kind,id_a,id_b,value")
        throw UsageError("disorder csv: missing or bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string kind, sa, sb, sv;
        std::getline(ss, kind, ',');
        std::getline(ss, sa, ',');
        std::getline(ss, sb, ',');
        std::getline(ss, sv, ',');
        if (kind == "J") {
            const std::int64_t id = bond_id_of_pair(lat, std::stoll(sa), std::stoll(sb));
            if (got_j[static_cast<std::size_t>(id)])
                throw UsageError("disorder csv: duplicate bond row");
            got_j[static_cast<std::size_t>(id)] = true;
            r.j[static_cast<std::size_t>(id)] = std::stod(sv);
        } else if (kind == "h") {
            const Site x = std::stoll(sa);
            lat.check_site(x);
            if (got_h[static_cast<std::size_t>(x)])
                throw UsageError("disorder csv: duplicate site row");
            got_h[static_cast<std::size_t>(x)] = true;
            r.h[static_cast<std::size_t>(x)] = std::stod(sv);
        } else {
            throw UsageError("disorder csv: unknown kind '" + kind + "'");
        }
    }
    for (bool g : got_j)
        if (!g) throw UsageError("disorder csv: missing bond rows");
    for (bool g : got_h)
        if (!g) throw UsageError("disorder csv: missing site rows");
    return r;
}

} // namespace quench
