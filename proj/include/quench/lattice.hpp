#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quench/errors.hpp"

namespace quench {

using Site = std::int64_t;

// Unordered nearest-neighbor pair, canonical a < b. A bond is keyed by
// (site, axis) of the +axis step from `site`, so id = site*d + axis and
// couplings live in flat arrays of length d*N.
struct Bond {
    Site a = 0;
    Site b = 0;
    std::int64_t id = 0;
    int axis = 0;
};

// Finite periodic box Z_{L1} x ... x Z_{Ld}, row-major site indexing with
// axis 0 slowest. Every side must be >= 3: with L = 2 the wrap doubles the
// bond between a pair of sites and the torus becomes a multigraph.
class TorusLattice {
public:
    explicit TorusLattice(std::vector<int> dims);

    int dim() const { return d_; }
    Site n_sites() const { return n_; }
    std::int64_t n_bonds() const { return static_cast<std::int64_t>(d_) * n_; }
    const std::vector<int>& dims() const { return dims_; }

    Site index(std::span<const int> coords) const;
    std::vector<int> coords(Site x) const;

    // the 2d neighbors of x, ordered (+axis0, -axis0, +axis1, -axis1, ...)
    std::span<const Site> neighbors(Site x) const {
        return {nbr_.data() + static_cast<std::size_t>(x) * 2 * d_,
                static_cast<std::size_t>(2 * d_)};
    }

    Site step(Site x, int axis, int dir) const;

    Bond bond(std::int64_t bond_id) const;
    std::int64_t bond_id(Site x, int axis) const { return x * d_ + axis; }
    std::vector<Bond> bonds() const;

    // sites at lattice distance <= 1, x first; size 2d+1, all distinct
    void ball1(Site x, std::vector<Site>& out) const;

    void check_site(Site x) const;

private:
    std::vector<int> dims_;
    int d_ = 0;
    Site n_ = 0;
    std::vector<std::int64_t> strides_;
    std::vector<Site> nbr_;
};

} // namespace quench
