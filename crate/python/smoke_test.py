"""Smoke test for the heisenberg_py extension module."""

import cmath
import math

import heisenberg_py as hp


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    g = hp.Grid.cubic(1, 8, 4.0)
    assert len(g) == 512 and g.points == [8, 8, 8]

    xs = g.axis_values(0)
    vals = [
        complex(math.exp(-(x * x + y * y + z * z) / 2), 0.0)
        for x in xs for y in g.axis_values(1) for z in g.axis_values(2)
    ]
    f = hp.Field(g, vals)
    back = f.forward().inverse()
    assert (back - f).sup_norm() < 1e-12
    assert close(f.forward().l2_norm_sq(), f.l2_norm_sq(), 1e-12)
    assert (hp.convolve(f, hp.Field.delta(g)) - f).sup_norm() < 1e-12
    assert hp.Field.from_json(f.to_json()).values == f.values

    gen = hp.Generator("gamma_variance")
    assert gen.psi([0.0, 0.0, 0.0]) == 0.0
    nu, diag = hp.semigroup(gen, 1.0, g, route="fourier")
    mu, _ = hp.semigroup(gen, 1.0, g, route="expm", theta=0.0)
    assert (mu - nu).sup_norm() < 1e-8 * nu.sup_norm()
    assert close(diag["diagnostics"]["mass"], 1.0, 1e-10)

    b = hp.resolvent(gen, 1 + 0j, g, theta=0.0)
    assert isinstance(b.integral(), complex)
    g12 = hp.Grid.cubic(1, 12, 6.0)
    rep = hp.decay_report([(t, hp.remainder(gen, t, g12)) for t in (0.5, 1.0)], 5.0)
    assert set(rep) == {"p", "shells", "entries", "ratio"}

    assert close(hp.bessel_k(0.5, 1.0), math.sqrt(math.pi / 2) * math.exp(-1), 1e-12)
    assert close(hp.gamma_fn(5.0), 24.0, 1e-12)
    assert close(hp.gamma_variance_density(1.0, 1, 1.0), 0.5 * math.exp(-1), 1e-12)
    assert hp.asymptotic_classify(0.25, 1)["regime"] == "power"
    assert close(hp.slope_fit([(r, r ** -2.0) for r in (0.1, 0.2, 0.3, 0.4, 0.5)]), -2.0, 1e-12)

    assert "group_conv.identity" in hp.suites()
    (outcome,) = hp.run_suites("group_conv.identity")
    assert outcome["passed"]
    assert hp.cli_main(["verify", "--suite", "grid"]) == 0
    assert hp.cli_main(["semigroup", "--route", "nowhere"]) == 2

    try:
        hp.Generator("nonexistent")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown generator accepted")
    assert cmath.isclose(hp.Field.delta(g).integral(), 1.0)
    print("smoke test passed")


if __name__ == "__main__":
    main()
