#include "quench/hamiltonian.hpp"

#include <cmath>

#include "quench/numeric.hpp"

namespace quench {

Potential::Potential(Kind kind, const TorusLattice& lat, const DisorderRealization& dis,
                     SpinSpace space)
    : kind_(kind), lat_(&lat), dis_(&dis), space_(space) {
    if (dis.j.size() != static_cast<std::size_t>(lat.n_bonds()) ||
        dis.h.size() != static_cast<std::size_t>(lat.n_sites()))
        throw UsageError("potential: disorder arrays do not match the lattice");
    if (kind == Kind::IsingPair && space.kind != SpinSpace::Kind::Ising)
        throw UsageError("potential: IsingPair needs the Ising spin space");
}

void Potential::couplings_at(Site x, std::vector<double>& out) const {
    const int d = lat_->dim();
    out.resize(static_cast<std::size_t>(2 * d));
    const auto nb = lat_->neighbors(x);
    for (int a = 0; a < d; ++a) {
        out[static_cast<std::size_t>(2 * a)] =
            dis_->j[static_cast<std::size_t>(lat_->bond_id(x, a))];
        out[static_cast<std::size_t>(2 * a + 1)] =
            dis_->j[static_cast<std::size_t>(lat_->bond_id(nb[static_cast<std::size_t>(2 * a + 1)], a))];
    }
}

double Potential::local_energy(Site x, const SpinConfig& s) const {
    const int d = lat_->dim();
    const auto nb = lat_->neighbors(x);
    if (kind_ == Kind::IsingPair) {
        const double sx = s.spin(x);
        double pair = 0.0;
        for (int a = 0; a < d; ++a) {
            pair += dis_->j[static_cast<std::size_t>(lat_->bond_id(x, a))] *
                    s.spin(nb[static_cast<std::size_t>(2 * a)]);
            pair += dis_->j[static_cast<std::size_t>(
                        lat_->bond_id(nb[static_cast<std::size_t>(2 * a + 1)], a))] *
                    s.spin(nb[static_cast<std::size_t>(2 * a + 1)]);
        }
        return -dis_->h[static_cast<std::size_t>(x)] * sx - 0.5 * sx * pair;
    }
    const int sx = s.spin(x);
    double pair = 0.0;
    for (int a = 0; a < d; ++a) {
        const Site zp = nb[static_cast<std::size_t>(2 * a)];
        const Site zm = nb[static_cast<std::size_t>(2 * a + 1)];
        if (s.spin(zp) == sx) pair += dis_->j[static_cast<std::size_t>(lat_->bond_id(x, a))];
        if (s.spin(zm) == sx) pair += dis_->j[static_cast<std::size_t>(lat_->bond_id(zm, a))];
    }
    return -dis_->h[static_cast<std::size_t>(x)] * (sx == 1 ? 1.0 : 0.0) - 0.5 * pair;
}

double Potential::delta_local(double hx, std::span<const double> js,
                              std::span<const int> nbr_vals, int old_value,
                              int new_value) const {
    if (old_value == new_value) return 0.0;
    if (kind_ == Kind::IsingPair) {
        double field = hx;
        for (std::size_t k = 0; k < js.size(); ++k)
            field += js[k] * nbr_vals[k];
        return static_cast<double>(old_value - new_value) * field;
    }
    double acc = -hx * ((new_value == 1 ? 1.0 : 0.0) - (old_value == 1 ? 1.0 : 0.0));
    for (std::size_t k = 0; k < js.size(); ++k) {
        const int sz = nbr_vals[k];
        acc -= js[k] * ((sz == new_value ? 1.0 : 0.0) - (sz == old_value ? 1.0 : 0.0));
    }
    return acc;
}

double Potential::delta(Site x, const SpinConfig& s, int new_value) const {
    if (!space_.valid_value(new_value))
        throw UsageError("delta: value outside spin space");
    const int old_value = s.spin(x);
    if (old_value == new_value) return 0.0;
    const int d = lat_->dim();
    const auto nb = lat_->neighbors(x);

    if (kind_ == Kind::IsingPair) {
        double field = dis_->h[static_cast<std::size_t>(x)];
        for (int a = 0; a < d; ++a) {
            field += dis_->j[static_cast<std::size_t>(lat_->bond_id(x, a))] *
                     s.spin(nb[static_cast<std::size_t>(2 * a)]);
            field += dis_->j[static_cast<std::size_t>(
                         lat_->bond_id(nb[static_cast<std::size_t>(2 * a + 1)], a))] *
                     s.spin(nb[static_cast<std::size_t>(2 * a + 1)]);
        }
        return static_cast<double>(old_value - new_value) * field;
    }

    double acc = -dis_->h[static_cast<std::size_t>(x)] *
                 ((new_value == 1 ? 1.0 : 0.0) - (old_value == 1 ? 1.0 : 0.0));
    for (int a = 0; a < d; ++a) {
        const Site zp = nb[static_cast<std::size_t>(2 * a)];
        const Site zm = nb[static_cast<std::size_t>(2 * a + 1)];
        const double jp = dis_->j[static_cast<std::size_t>(lat_->bond_id(x, a))];
        const double jm = dis_->j[static_cast<std::size_t>(lat_->bond_id(zm, a))];
        acc -= jp * ((s.spin(zp) == new_value ? 1.0 : 0.0) - (s.spin(zp) == old_value ? 1.0 : 0.0));
        acc -= jm * ((s.spin(zm) == new_value ? 1.0 : 0.0) - (s.spin(zm) == old_value ? 1.0 : 0.0));
    }
    return acc;
}

double Potential::total_energy(const SpinConfig& s) const {
    NeumaierSum sum;
    for (Site x = 0; x < lat_->n_sites(); ++x)
        sum.add(local_energy(x, s));
    return sum.value();
}

double Potential::min_positive_drop(Site x) const {
    const int d = lat_->dim();
    const int n_nbr = 2 * d;
    const int q = space_.size();

    std::vector<double> js;
    couplings_at(x, js);
    const double hx = dis_->h[static_cast<std::size_t>(x)];

    std::vector<int> vals(static_cast<std::size_t>(n_nbr), space_.value(0));
    std::vector<int> digit(static_cast<std::size_t>(n_nbr), 0);
    double best = 0.0;
    bool found = false;

    std::int64_t n_assign = 1;
    for (int k = 0; k < n_nbr; ++k) n_assign *= q;

    for (std::int64_t idx = 0; idx < n_assign; ++idx) {
        for (int oi = 0; oi < q; ++oi)
            for (int ni = 0; ni < q; ++ni) {
                if (oi == ni) continue;
                const double drop =
                    -delta_local(hx, js, vals, space_.value(oi), space_.value(ni));
                if (drop > kZeroTol && (!found || drop < best)) {
                    best = drop;
                    found = true;
                }
            }
        // odometer step
        for (int k = 0; k < n_nbr; ++k) {
            if (++digit[static_cast<std::size_t>(k)] < q) {
                vals[static_cast<std::size_t>(k)] = space_.value(digit[static_cast<std::size_t>(k)]);
                break;
            }
            digit[static_cast<std::size_t>(k)] = 0;
            vals[static_cast<std::size_t>(k)] = space_.value(0);
        }
    }
    return found ? best : 1.0; // epsilon-bar convention when no positive drop exists
}

bool zero_energy_flip_possible(Potential::Kind kind, SpinSpace space, double j, double h, int d,
                               double tol) {
    if (d < 1) throw UsageError("zero_energy_flip_possible: d must be >= 1");
    // dummy bindings so delta_local can run without a lattice
    TorusLattice lat3(std::vector<int>(1, 3));
    DisorderRealization dis;
    dis.j.assign(static_cast<std::size_t>(lat3.n_bonds()), 0.0);
    dis.h.assign(static_cast<std::size_t>(lat3.n_sites()), 0.0);
    Potential pot(kind, lat3, dis, space);

    const int n_nbr = 2 * d;
    const int q = space.size();
    const std::vector<double> js(static_cast<std::size_t>(n_nbr), j);
    std::vector<int> vals(static_cast<std::size_t>(n_nbr), space.value(0));
    std::vector<int> digit(static_cast<std::size_t>(n_nbr), 0);

    std::int64_t n_assign = 1;
    for (int k = 0; k < n_nbr; ++k) n_assign *= q;

    for (std::int64_t idx = 0; idx < n_assign; ++idx) {
        for (int oi = 0; oi < q; ++oi)
            for (int ni = 0; ni < q; ++ni) {
                if (oi == ni) continue;
                if (std::abs(pot.delta_local(h, js, vals, space.value(oi), space.value(ni))) <= tol)
                    return true;
            }
        for (int k = 0; k < n_nbr; ++k) {
            if (++digit[static_cast<std::size_t>(k)] < q) {
                vals[static_cast<std::size_t>(k)] = space.value(digit[static_cast<std::size_t>(k)]);
                break;
            }
            digit[static_cast<std::size_t>(k)] = 0;
            vals[static_cast<std::size_t>(k)] = space.value(0);
        }
    }
    return false;
}

} // namespace quench
