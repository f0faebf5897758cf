#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quench/lattice.hpp"

namespace quench {

enum class CouplingLaw { Constant, Gaussian, PmJ, Uniform, Cauchy, Hopfield };
enum class FieldLaw { Zero, Constant, Gaussian, Pm };

// A disorder family plus seed. Coupling parameters by law:
//   constant(c)      cp0 = c
//   gaussian(mu,s)   cp0 = mu, cp1 = s        (s > 0)
//   pmj(J,alpha)     cp0 = J,  cp1 = alpha    (J > 0, 0 <= alpha <= 1; P(+J) = alpha)
//   uniform(a,b)     cp0 = a,  cp1 = b        (a < b)
//   cauchy(x0,g)     cp0 = x0, cp1 = g        (g > 0)
//   hopfield(M)      hopfield_m = M           (M >= 1)
// Field parameters mirror the coupling ones; pm(h,alpha) like pmj.
struct DisorderSpec {
    CouplingLaw coupling = CouplingLaw::Constant;
    double cp0 = 1.0;
    double cp1 = 0.0;
    int hopfield_m = 1;
    FieldLaw field = FieldLaw::Zero;
    double fp0 = 0.0;
    double fp1 = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string coupling_str() const;
    std::string field_str() const;

    static DisorderSpec from_strings(const std::string& coupling, const std::string& field,
                                     std::uint64_t seed);
};

// Quenched couplings J per bond id and fields h per site. Regenerating from
// the same (lattice, spec) is bit-identical; `spec` is empty for realizations
// read back from CSV.
struct DisorderRealization {
    std::vector<double> j;
    std::vector<double> h;
    std::optional<DisorderSpec> spec;
};

DisorderRealization sample_iid(const TorusLattice&, const DisorderSpec&);
DisorderRealization sample_hopfield(const TorusLattice&, int m, std::uint64_t seed,
                                    FieldLaw field = FieldLaw::Zero, double fp0 = 0.0,
                                    double fp1 = 0.0);
DisorderRealization sample(const TorusLattice&, const DisorderSpec&);

struct FiniteMeanReport {
    double mean_abs_j = 0.0;
    double max_abs_j = 0.0;
    double max_over_sum = 0.0; // share of the largest |J| in the sum of all |J|
    bool heavy_tail_warning = false;
    std::int64_t samples = 0;
};

// Empirical E|J| plus a heavy-tail flag. The flag trips when a single bond
// carries more than kHeavyTailShare of the total |J| mass, which is where the
// running mean stops stabilizing; meaningful from ~1e3 bonds up.
inline constexpr double kHeavyTailShare = 0.01;
FiniteMeanReport finite_mean_diagnostic(std::span<const DisorderRealization> realizations);

// CSV schema: header `kind,id_a,id_b,value`; kind J rows carry the bond's two
// canonical site ids, kind h rows leave id_b empty. Values are printed with 17
// significant digits so the round-trip is bit-exact.
void write_disorder_csv(std::ostream&, const TorusLattice&, const DisorderRealization&);
DisorderRealization read_disorder_csv(std::istream&, const TorusLattice&);

} // namespace quench
