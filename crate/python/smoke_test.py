"""Smoke test for the dyadic_py extension.

Build first:  pip install --no-build-isolation -e crates/py
Then run:     python python/smoke_test.py
"""

import math

import dyadic_py as dy


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok  {msg}")


def main():
    p = dy.Params(2.0, 2.5, 10)
    check(p.horizon > 0 and p.n_shells == 10, f"params {p!r}")

    u = [1.0, -0.5, 0.25, 0.1]
    small = dy.Params(2.0, 2.5, 4)
    check(abs(dy.nonlinear_energy_flux(u, small)) < 1e-10, "nonlinear flux cancels")
    rhs = dy.shell_rhs(u, [0.0] * 4, small)
    check(len(rhs) == 4 and all(math.isfinite(x) for x in rhs), "shell_rhs finite")

    try:
        dy.Params(0.5, 2.5, 4)
    except ValueError:
        check(True, "lambda <= 1 rejected with ValueError")
    else:
        check(False, "lambda <= 1 rejected with ValueError")

    rep = dy.spectrum(p)
    check(rep["q"] > 1.0, f"spectral search picked q = {rep['q']:.4f}")

    # single linear shell: u' = -lambda^2 u has a closed form
    one = dy.Params(2.0, 2.5, 1)
    t, traj = dy.solve(one, [1.0], 0.5, grid=[0.0, 0.25, 0.5])
    err = max(abs(traj[i][0] - math.exp(-4.0 * ti)) for i, ti in enumerate(t))
    check(err < 1e-8, f"linear decay matches exp(-4t) (err {err:.1e})")

    c = dy.Construction(p)
    t1 = c.shell_time(1)
    tn = 0.9 * p.horizon
    gap = abs(c.u(1, tn, 1.0) - c.u(1, tn, -1.0))
    check(gap > 1e-10, f"constructed pair separates (|u+ - u-| = {gap:.3e} on shell 1)")
    check(math.isclose(c.u(2, t1, 1.0), c.v(2, t1) + c.g(2, t1)), "u = v + g")

    cert = dy.certify(p)
    check(cert["pass"], "certificate passes")

    uq = dy.uniqueness(dy.Params(2.0, 2.0, 8))
    check(isinstance(uq, dict), "uniqueness study runs")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
