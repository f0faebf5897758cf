"""Smoke tests for the python module (plain asserts, run under ctest)."""

import json
import sys

import _quench as q

CFG = """
lattice.dims = 8,8
disorder.coupling = gaussian(0,1)
seed = 17
replicates = 3
t_max = 200
epsilons = 0,0.5
"""


def test_lattice():
    lat = q.TorusLattice([4, 5])
    assert lat.n_sites == 20
    assert lat.n_bonds == 40
    for x in range(lat.n_sites):
        for y in lat.neighbors(x):
            assert x in lat.neighbors(y)
    assert lat.index(lat.coords(13)) == 13


def test_simulate_events():
    ev = q.simulate_events(CFG)
    assert ev["end_reason"] == "absorbed"
    assert all(dh <= 1e-12 for dh in ev["delta_h"])
    assert ev["t"] == sorted(ev["t"])
    assert q.simulate_events(CFG) == ev  # deterministic


def test_run_experiment():
    rep = json.loads(q.run_experiment(CFG, "simulate"))
    assert rep["aggregate"]["replicates"] == 3
    assert rep["aggregate"]["absorbed_fraction"] == 1.0
    rep2 = json.loads(q.run_experiment(CFG, "simulate"))
    assert rep == rep2


def test_disorder_and_kstar():
    j, h = q.sample_disorder([6, 6], "pmj(1,1)", "zero", 3)
    assert len(j) == 72 and len(h) == 36
    assert all(v == 1.0 for v in j)
    ks = q.k_star([6, 6], "gaussian(0,1)", "zero", 5)
    j2, _ = q.sample_disorder([6, 6], "gaussian(0,1)", "zero", 5)
    assert all(abs(a - abs(b)) <= 1e-12 for a, b in zip(ks, j2))


def test_parity():
    assert q.zero_energy_flip_possible(1.0, 0.0, 1)
    assert not q.zero_energy_flip_possible(1.0, 0.5, 1)


def test_errors():
    try:
        q.run_experiment("lattice.dims = 2,2\ndisorder.coupling = constant(1)\nseed = 1\n")
    except q.UsageError:
        pass
    else:
        raise AssertionError("expected UsageError for L < 3")


if __name__ == "__main__":
    fns = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for fn in fns:
        fn()
        print(f"ok {fn.__name__}")
    print(f"{len(fns)} smoke tests passed")
    sys.exit(0)
