"""Smoke test for the pyadalang extension module.

Uses an installed `pyadalang` if there is one (e.g. after `maturin develop`),
otherwise loads the library from `target/release` after
`cargo build --release -p adaptive-langevin-py`.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import pyadalang

        return pyadalang
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libpyadalang.so", "libpyadalang.dylib", "pyadalang.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("pyadalang", str(lib))
            spec = importlib.util.spec_from_file_location("pyadalang", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("pyadalang not found: build it with `cargo build --release -p adaptive-langevin-py`")


def main():
    al = load()
    assert "EM_IP" in al.schemes() and "BAOAB_TILDE" in al.schemes()

    # Gaussian moments by quadrature
    ho = al.Potential.harmonic(1.0)
    m = al.gibbs_moments(ho, 1.0, (-15.0, 15.0))
    for got, want in zip(m, [0.0, 1.0, 0.0, 3.0]):
        assert abs(got - want) < 1e-10, m

    well = al.Potential.modified_harmonic(10.0, 0.1, 0.1, 0.5)
    g = al.Monitor.well(well, "omega", m=0.001, big_m=2.0)
    lo, hi = g.bounds
    assert lo <= g.value([0.3]) <= hi
    assert well.dim == 1 and len(well.gradient([0.3])) == 1

    r = al.sample("EM_IP", well, g, h=0.05, beta_inv=0.1, t_final=5.0, n_traj=2000, seed=7, x0=[0.5], init_var=0.1)
    assert r["n_traj"] == 2000 and r["escaped"] == 0, r["escaped"]
    assert len(r["final_x"]) == 2000
    assert lo <= r["mean_monitor"] <= hi
    again = al.sample("EM_IP", well, g, h=0.05, beta_inv=0.1, t_final=5.0, n_traj=2000, seed=7, x0=[0.5], init_var=0.1)
    assert again["final_x"] == r["final_x"], "same seed must reproduce bit for bit"

    l1 = al.histogram_l1(r["final_x"], well, 0.1, (-12.0, 12.0), bins=50, hist_support=(-4.0, 4.0))
    assert 0.0 <= l1 < 0.5, l1

    tp = al.Potential.two_pathway()
    ch = al.Monitor.channel("reciprocal")
    u = al.sample("BAOAB_TILDE", tp, ch, h=0.01, beta_inv=0.1, t_final=1.0, n_traj=4, gamma=0.5, x0=[-2.0, 0.0])
    assert all(math.isfinite(v) for v in u["moments"])

    rows = al.audit(g, well, [(-3.0, 3.0)])
    assert rows and all(len(row) == 4 for row in rows)

    res = al.adjoint_residual(well, g, 0.1, (-10.0, 10.0), spacing=4e-3)
    assert res["sup_ip"] < 1e-2

    try:
        al.sample("NOPE", well, g, h=0.1, beta_inv=1.0, t_final=1.0, n_traj=1)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scheme accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
