#include "quench/lattice.hpp"

#include <string>

namespace quench {

TorusLattice::TorusLattice(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty())
        throw UsageError("lattice: need at least one dimension");
    d_ = static_cast<int>(dims_.size());
    n_ = 1;
    for (int L : dims_) {
        if (L < 3)
            throw UsageError("lattice: every side must be >= 3, got " + std::to_string(L));
        n_ *= L;
    }
    strides_.assign(d_, 1);
    for (int a = d_ - 2; a >= 0; --a)
        strides_[a] = strides_[a + 1] * dims_[a + 1];

    nbr_.resize(static_cast<std::size_t>(n_) * 2 * d_);
    for (Site x = 0; x < n_; ++x)
        for (int a = 0; a < d_; ++a) {
            nbr_[static_cast<std::size_t>(x) * 2 * d_ + 2 * a] = step(x, a, +1);
            nbr_[static_cast<std::size_t>(x) * 2 * d_ + 2 * a + 1] = step(x, a, -1);
        }
}

Site TorusLattice::index(std::span<const int> coords) const {
    if (static_cast<int>(coords.size()) != d_)
        throw UsageError("lattice: coordinate arity mismatch");
    Site x = 0;
    for (int a = 0; a < d_; ++a) {
        int c = coords[a] % dims_[a];
        if (c < 0) c += dims_[a];
        x += static_cast<Site>(c) * strides_[a];
    }
    return x;
}

std::vector<int> TorusLattice::coords(Site x) const {
    check_site(x);
    std::vector<int> c(d_);
    for (int a = 0; a < d_; ++a)
        c[a] = static_cast<int>((x / strides_[a]) % dims_[a]);
    return c;
}

Site TorusLattice::step(Site x, int axis, int dir) const {
    const std::int64_t s = strides_[axis];
    const int L = dims_[axis];
    const int c = static_cast<int>((x / s) % L);
    int c2 = c + dir;
    if (c2 < 0) c2 += L;
    if (c2 >= L) c2 -= L;
    return x + static_cast<Site>(c2 - c) * s;
}

Bond TorusLattice::bond(std::int64_t bond_id) const {
    if (bond_id < 0 || bond_id >= n_bonds())
        throw UsageError("lattice: bond id out of range");
    const Site x = bond_id / d_;
    const int axis = static_cast<int>(bond_id % d_);
    const Site y = nbr_[static_cast<std::size_t>(x) * 2 * d_ + 2 * axis];
    Bond b;
    b.a = x < y ? x : y;
    b.b = x < y ? y : x;
    b.id = bond_id;
    b.axis = axis;
    return b;
}

std::vector<Bond> TorusLattice::bonds() const {
    std::vector<Bond> out;
    out.reserve(static_cast<std::size_t>(n_bonds()));
    for (std::int64_t id = 0; id < n_bonds(); ++id)
        out.push_back(bond(id));
    return out;
}

void TorusLattice::ball1(Site x, std::vector<Site>& out) const {
    out.clear();
    out.push_back(x);
    for (Site y : neighbors(x))
        out.push_back(y);
}

void TorusLattice::check_site(Site x) const {
    if (x < 0 || x >= n_)
        throw UsageError("lattice: site index " + std::to_string(x) + " out of range [0," +
                         std::to_string(n_) + ")");
}

} // namespace quench
