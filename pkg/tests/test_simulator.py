import logging

import numpy as np
import pytest

from rdinstab import SystemParams, example2, scalar_example
from rdinstab import simulator as sim
from rdinstab import spectral as sp
from rdinstab.errors import InvalidParameters, ZeroEnergy

SCALAR_ROOT = 0.8686613351139438
EX2_ROOT = 0.16937033418950193


def decoupled(theta_o=1.0):
    return SystemParams(A=[[-1.0]], B=[0.0], C=[0.0], nu=1.0, lam=0.0, theta_i=1.0, theta_o=theta_o)


def _traj(times, energy):
    t = np.asarray(times, float)
    e = np.asarray(energy, float)
    z = np.zeros((t.size, 3))
    with np.errstate(divide="ignore"):
        le = np.log(e)
    return sim.Trajectory(t, np.zeros((t.size, 1)), z, e, le, np.linspace(0, 1, 3))


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameters):
            sim.SimConfig(M=8)
        with pytest.raises(InvalidParameters):
            sim.SimConfig(dt=0.0)
        with pytest.raises(InvalidParameters):
            sim.SimConfig(dt=1.0, t_end=0.5)

    def test_defaults(self):
        cfg = sim.SimConfig()
        assert (cfg.M, cfg.dt, cfg.t_end) == (256, 1e-3, 20.0)
        assert cfg.scheme is sim.Scheme.IMPLICIT_TRAPEZOIDAL


class TestGrowthRate:
    def test_exact_exponential(self):
        t = np.linspace(0, 10, 101)
        assert sim.growth_rate(_traj(t, np.exp(0.4 * t))) == pytest.approx(0.4, abs=1e-10)

    def test_zero_energy(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(ZeroEnergy):
            sim.growth_rate(_traj(t, np.zeros_like(t)))

    def test_fraction(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(InvalidParameters):
            sim.growth_rate(_traj(t, np.exp(t)), 1.0)


class TestSimulate:
    def test_decoupled_mode(self):
        p = decoupled()
        traj = sim.simulate(p, sim.SimConfig(M=128, t_end=1.0), [0.0], lambda th: np.sin(np.pi * th))
        assert sim.growth_rate(traj) == pytest.approx(-2 * np.pi ** 2, rel=0.01)

    def test_scalar_unstable(self, scalar_unstable):
        rate = sim.growth_rate(sim.simulate(scalar_unstable))
        assert rate == pytest.approx(2 * SCALAR_ROOT, rel=0.10)
        assert rate == pytest.approx(2 * SCALAR_ROOT, rel=1e-4)

    def test_scalar_stable(self, scalar_stable):
        assert sim.growth_rate(sim.simulate(scalar_stable)) < 0

    def test_example2(self, ex2):
        assert sim.growth_rate(sim.simulate(ex2)) == pytest.approx(2 * EX2_ROOT, rel=0.15)

    def test_boundary_rows(self, ex2):
        traj = sim.simulate(ex2, sim.SimConfig(M=64, t_end=1.0))
        np.testing.assert_array_equal(traj.z[:, 0], traj.x @ ex2.C[0])
        assert not traj.z[:, -1].any()

    def test_incompatible_start_warns(self, scalar_unstable, caplog):
        with caplog.at_level(logging.WARNING, logger="rdinstab.simulator"):
            traj = sim.simulate(scalar_unstable, sim.SimConfig(M=32, t_end=0.1), [1.0], lambda th: np.ones_like(th))
        assert "incompatible" in caplog.text
        assert traj.z[0, -1] == 0.0 and traj.z[0, 0] == 1.0

    def test_superposition(self, ex2, rng):
        cfg = sim.SimConfig(M=64, t_end=2.0)
        th = np.linspace(0, ex2.theta_i, 200)
        x1, x2 = rng.normal(size=2), rng.normal(size=2)
        c1, c2 = rng.normal(size=(2, 3))

        def prof(x, c):
            u = lambda t: np.asarray(t) / ex2.theta_i  # noqa: E731
            return lambda t: (ex2.C[0] @ x) * (1 - u(t)) + sum(ck * np.sin((k + 1) * np.pi * u(t)) for k, ck in enumerate(c))

        a = sim.simulate(ex2, cfg, x1, prof(x1, c1))
        b = sim.simulate(ex2, cfg, x2, prof(x2, c2))
        s = sim.simulate(ex2, cfg, x1 + x2, lambda t: prof(x1, c1)(t) + prof(x2, c2)(t))
        scale = np.abs(s.z).max()
        np.testing.assert_allclose(a.z + b.z, s.z, rtol=0, atol=1e-10 * scale)
        np.testing.assert_allclose(a.x + b.x, s.x, rtol=0, atol=1e-10 * scale)

    def test_deterministic(self, ex2):
        cfg = sim.SimConfig(M=32, t_end=1.0)
        assert sim.simulate(ex2, cfg).to_csv() == sim.simulate(ex2, cfg).to_csv()

    def test_long_run_no_overflow(self):
        p = scalar_example(5.0, -1.0)
        traj = sim.simulate(p, sim.SimConfig(M=32, dt=1e-2, t_end=200.0))
        assert np.all(np.isfinite(traj.log_energy))
        assert sim.growth_rate(traj) > 0

    def test_initial_state_size(self, ex2):
        with pytest.raises(InvalidParameters):
            sim.simulate(ex2, sim.SimConfig(M=32, t_end=0.1), [1.0], lambda t: 0 * t)

    def test_csv(self, ex2, tmp_path):
        traj = sim.simulate(ex2, sim.SimConfig(M=16, t_end=0.1))
        lines = traj.to_csv(tmp_path / "t.csv").splitlines()
        assert lines[0] == "t,x_1,x_2,energy"
        assert len(lines) == traj.times.size + 1
        zl = traj.z_to_csv().splitlines()
        assert zl[0].split(",")[:2] == ["t", "theta_0"] and len(zl[0].split(",")) == 18


class TestStencil:
    def test_choice(self):
        idx, _ = sim.flux_weights(example2(), 30)
        assert list(idx) == [20, 21, 22]
        idx, w = sim.flux_weights(scalar_example(0, -1), 16)
        assert list(idx) == [14, 15, 16]
        np.testing.assert_allclose(w * (1 / 16), [0.5, -2.0, 1.5])

    @pytest.mark.parametrize("theta_o", [1.0, 0.45, 0.0])
    def test_flux_order(self, theta_o):
        p = scalar_example(0, -1).with_(theta_o=theta_o)
        f = lambda th: np.sinh(1.3 * (1 - th)) + th ** 3  # noqa: E731
        exact = -1.3 * np.cosh(1.3 * (1 - theta_o)) + 3 * theta_o ** 2
        # grids keeping theta_o at the same relative position between nodes
        Ms = [40, 80, 160, 320]
        errs = []
        for M in Ms:
            idx, w = sim.flux_weights(p, M)
            errs.append(abs(w @ f(idx / M) - exact))
        order = np.polyfit(np.log(Ms), np.log(errs), 1)[0]
        assert -order >= 1.9


def test_spatial_convergence(scalar_unstable):
    Ms = [32, 64, 128, 256]
    errs = [abs(sim.semidiscrete_spectrum(scalar_unstable, M)[0].real - SCALAR_ROOT) for M in Ms]
    order = -np.polyfit(np.log(Ms), np.log(errs), 1)[0]
    assert order >= 1.9


class TestEigenmode:
    def test_pde_mode(self):
        p = decoupled()
        rep = sim.eigenmode_check(p, sp.eigenfunction(p, -np.pi ** 2))
        assert rep["deviation"] < 0.005

    def test_scalar(self, scalar_unstable):
        ef = sp.eigenfunction(scalar_unstable, sp.rightmost_root(scalar_unstable))
        assert sim.eigenmode_check(scalar_unstable, ef)["deviation"] < 0.05

    def test_example2(self, ex2):
        ef = sp.eigenfunction(ex2, sp.rightmost_root(ex2))
        assert sim.eigenmode_check(ex2, ef)["deviation"] < 0.05

    def test_complex_mode(self):
        p = example2(input_sign=1.0)
        ef = sp.eigenfunction(p, sp.rightmost_root(p))
        assert abs(ef.s.imag) > 0.1
        assert sim.eigenmode_check(p, ef)["deviation"] < 0.05
