#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quench/disorder.hpp"
#include "quench/lattice.hpp"

namespace quench {

// Moves with |delta H| <= kZeroTol count as zero-energy. Discrete disorder
// produces exact-zero sums at small degree; continuous disorder essentially
// never lands inside the band.
inline constexpr double kZeroTol = 1e-12;

struct SpinSpace {
    enum class Kind { Ising, Potts };
    Kind kind = Kind::Ising;
    int q = 2;

    static SpinSpace ising() { return {Kind::Ising, 2}; }
    static SpinSpace potts(int q) {
        if (q < 2) throw UsageError("spin: Potts needs Q >= 2");
        return {Kind::Potts, q};
    }

    int size() const { return q; }

    // canonical enumeration: Ising {-1,+1}, Potts {1..Q}
    int value(int idx) const { return kind == Kind::Ising ? (idx == 0 ? -1 : +1) : idx + 1; }
    int index(int value) const { return kind == Kind::Ising ? (value < 0 ? 0 : 1) : value - 1; }
    bool valid_value(int v) const {
        return kind == Kind::Ising ? (v == -1 || v == 1) : (v >= 1 && v <= q);
    }
};

class SpinConfig {
public:
    SpinConfig(const TorusLattice& lat, SpinSpace space, int fill_value)
        : lat_(&lat), space_(space) {
        if (!space.valid_value(fill_value))
            throw UsageError("spin: fill value outside spin space");
        v_.assign(static_cast<std::size_t>(lat.n_sites()), static_cast<std::int8_t>(fill_value));
    }

    int spin(Site x) const { return v_[static_cast<std::size_t>(x)]; }
    void set(Site x, int val) { v_[static_cast<std::size_t>(x)] = static_cast<std::int8_t>(val); }

    Site n() const { return lat_->n_sites(); }
    const TorusLattice& lattice() const { return *lat_; }
    const SpinSpace& space() const { return space_; }
    const std::vector<std::int8_t>& raw() const { return v_; }

    bool operator==(const SpinConfig& o) const { return v_ == o.v_; }

private:
    const TorusLattice* lat_;
    SpinSpace space_;
    std::vector<std::int8_t> v_;
};

// Nearest-neighbor local potentials bound to one disorder realization:
//   IsingPair:  V_x = -h_x S_x - 1/2 sum_z J_{x,z} S_x S_z
//   PottsDelta: V_x = -h_x delta(S_x,1) - 1/2 sum_z J_{x,z} delta(S_x,S_z)
// Both depend only on {S_z : |z-x| <= 1}, which the dynamics and the
// percolation machinery rely on. Holds references; lattice and disorder must
// outlive the potential.
class Potential {
public:
    enum class Kind { IsingPair, PottsDelta };

    Potential(Kind kind, const TorusLattice& lat, const DisorderRealization& dis,
              SpinSpace space);

    double local_energy(Site x, const SpinConfig& s) const;

    // exact energy change of S_x -> new_value; 0 when new_value == S_x
    double delta(Site x, const SpinConfig& s, int new_value) const;

    double total_energy(const SpinConfig& s) const;

    // smallest strictly positive energy drop available at x over all local
    // spin assignments and value pairs; 1 when every move is energy-neutral
    double min_positive_drop(Site x) const;

    // energy change for an explicit local environment (h at x, couplings and
    // neighbor values in slot order); shared kernel for delta and the
    // enumeration ops
    double delta_local(double hx, std::span<const double> js, std::span<const int> nbr_vals,
                       int old_value, int new_value) const;

    Kind kind() const { return kind_; }
    const TorusLattice& lattice() const { return *lat_; }
    const DisorderRealization& disorder() const { return *dis_; }
    const SpinSpace& space() const { return space_; }

    // couplings on the 2d neighbor slots of x, same order as lat.neighbors(x)
    void couplings_at(Site x, std::vector<double>& out) const;

private:
    Kind kind_;
    const TorusLattice* lat_;
    const DisorderRealization* dis_;
    SpinSpace space_;
};

// True iff some assignment of the 2d+1 local spins admits an exactly
// energy-neutral move, for homogeneous couplings j and fields h in dimension
// d. Exhaustive over all |S0|^(2d) neighbor assignments and value pairs.
bool zero_energy_flip_possible(Potential::Kind kind, SpinSpace space, double j, double h, int d,
                               double tol = kZeroTol);

} // namespace quench
