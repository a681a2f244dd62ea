import numpy as np
import pytest

from rdinstab import SystemParams, example2, scalar_example
from rdinstab import spectral as sp
from rdinstab.model import char_delta, char_entire, left_half_plane_condition, open_loop_pde_spectrum, sigma_of
from rdinstab.verdict import VerdictKind

SCALAR_ROOT = 0.8686613351139438
EX2_ROOT = 0.16937033418950193


def decoupled(a=-1.0, lam=0.0):
    return SystemParams(A=[[a]], B=[0.0], C=[1.0], nu=1.0, lam=lam, theta_i=1.0, theta_o=1.0)


class TestCount:
    def test_scalar(self, scalar_unstable):
        assert sp.count_roots(scalar_unstable, sp.SearchRegion(0.1, 2, -1, 1)) == 1

    def test_decoupled_ode(self):
        assert sp.count_roots(decoupled(), sp.SearchRegion(-2.5, -0.5, -1, 1)) == 1

    def test_example2(self, ex2):
        assert sp.count_roots(ex2, sp.SearchRegion(0.05, 1, -1, 1)) == 1

    def test_open_loop_modes(self):
        # ODE root at -1 and the PDE modes -pi^2, -4 pi^2 inside
        assert sp.count_roots(decoupled(), sp.SearchRegion(-45, 0, -3, 3)) == 3

    def test_boundary_root_is_moved(self):
        p = scalar_example(-1.0, -1.0)
        # the root s = 0 sits on the left edge
        n = sp.count_roots(p, sp.SearchRegion(0.0, 1.0, -1, 1))
        assert n in (0, 1)

    def test_partition_additivity(self, rng):
        systems = [scalar_example(0.0, -1.0), example2(), example2(input_sign=1.0),
                   scalar_example(0.5, 2.0, lam=1.0)]
        for q in range(50):
            p = systems[q % len(systems)]
            x0, y0 = rng.uniform(-20, 3), rng.uniform(-20, 5)
            w, h = rng.uniform(0.5, 15), rng.uniform(0.5, 20)
            xm, ym = x0 + w * rng.uniform(0.3, 0.7), y0 + h * rng.uniform(0.3, 0.7)
            whole = sp.count_roots(p, sp.SearchRegion(x0, x0 + w, y0, y0 + h))
            parts = sum(sp.count_roots(p, sp.SearchRegion(a, b, c, d))
                        for a, b in ((x0, xm), (xm, x0 + w)) for c, d in ((y0, ym), (ym, y0 + h)))
            assert whole == parts


class TestFind:
    def test_scalar(self, scalar_unstable):
        roots = sp.find_roots(scalar_unstable, sp.SearchRegion(0.1, 2, -1, 1))
        assert len(roots) == 1
        assert roots[0].s == pytest.approx(SCALAR_ROOT, abs=1e-12)
        assert roots[0].residual <= 1e-12
        assert roots[0].multiplicity == 1

    def test_marginal_root_at_zero(self):
        roots = sp.find_roots(scalar_example(-1.0, -1.0), sp.SearchRegion(-0.5, 0.5, -1, 1))
        assert len(roots) == 1 and abs(roots[0].s) < 1e-10

    def test_example2(self, ex2):
        r = sp.rightmost_root(ex2)
        assert 0.15 <= r.s.real <= 0.25 and abs(r.s.imag) < 0.05
        assert r.s.real == pytest.approx(EX2_ROOT, abs=1e-12)
        assert r.delta_abs < 1e-8
        assert abs(char_delta(ex2, r.s)) < 1e-8

    def test_example2_opposite_sign_is_stable(self):
        r = sp.rightmost_root(example2(input_sign=1.0))
        assert r.s.real == pytest.approx(-0.7018260554555215, abs=1e-9)
        assert abs(r.s.imag) == pytest.approx(0.4090942938745681, abs=1e-9)

    def test_conjugate_pairs(self):
        p = example2(input_sign=1.0)
        roots = sp.find_roots(p, sp.SearchRegion(-30, 2, -10, 10))
        for r in roots:
            if abs(r.s.imag) > 1e-9:
                assert any(abs(q.s - np.conj(r.s)) < 1e-9 for q in roots)
                assert char_entire(p, np.conj(r.s)) == pytest.approx(np.conj(char_entire(p, r.s)), rel=1e-14, abs=1e-300)

    def test_found_equals_count(self, ex2):
        reg = sp.SearchRegion(-40, 2, -15, 15)
        roots = sp.find_roots(ex2, reg)
        assert sum(r.multiplicity for r in roots) == sp.count_roots(ex2, reg)
        assert all(r.residual <= reg.refine_tol for r in roots)

    def test_sorted_descending(self, ex2):
        roots = sp.find_roots(ex2, sp.SearchRegion(-40, 2, -15, 15))
        re = [r.s.real for r in roots]
        assert re == sorted(re, reverse=True)

    def test_open_loop_pde_modes(self, rng):
        for _ in range(3):
            nu, lam, ti = rng.uniform(0.5, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2)
            p = SystemParams(A=[[-1.0]], B=[0.0], C=[1.0], nu=nu, lam=lam, theta_i=ti, theta_o=ti)
            modes = open_loop_pde_spectrum(p, 5)
            reg = sp.SearchRegion(modes[-1] - 1.0, lam + 1.0, -1.0, 1.0)
            roots = [r.s for r in sp.find_roots(p, reg) if abs(r.s + 1) > 1e-6]
            np.testing.assert_allclose(sorted(np.real(roots)), sorted(modes), rtol=0, atol=1e-8)

    def test_corollary_equivalence(self, ex2):
        for r in sp.find_roots(ex2, sp.SearchRegion(-40, 2, -15, 15)):
            assert left_half_plane_condition(ex2, sigma_of(ex2, r.s)) == (r.s.real < 0)

    def test_csv_row(self, scalar_unstable):
        r = sp.find_roots(scalar_unstable, sp.SearchRegion(0.1, 2, -1, 1))[0]
        fields = r.csv_row().split(",")
        assert len(fields) == 5 and fields[4] == "grid" and fields[3] == "1"


class TestAsymptotic:
    def test_seeds(self, scalar_unstable):
        ks, dev = np.arange(10, 21), []
        for k in ks:
            s0 = sp.asymptotic_seed(scalar_unstable, int(k))
            s, it, _ = sp.newton_polish(scalar_unstable, s0)
            assert it <= 8
            sig = sigma_of(scalar_unstable, s)
            sig = sig if sig.imag > 0 else -sig
            dev.append(abs(sig - 1j * k * np.pi))
        c = np.max(np.array(dev) * ks)
        # deviation decays like c / k with the fitted constant
        assert c < 0.5
        np.testing.assert_allclose(np.array(dev) * ks, c, rtol=0.05)

    def test_seed_value(self):
        p = scalar_example(0, -1, lam=2.0, nu=0.5, theta_i=2.0)
        assert sp.asymptotic_seed(p, 3) == pytest.approx(2.0 - 0.5 * (3 * np.pi / 2) ** 2)


class TestRealAxis:
    def test_scalar(self, scalar_unstable):
        assert sp.real_axis_unstable_root(scalar_unstable, 5).root == pytest.approx(SCALAR_ROOT, abs=1e-13)

    def test_stable(self, scalar_stable):
        scan = sp.real_axis_unstable_root(scalar_stable, 5)
        assert scan.root is None and scan.sign_at_zero == 1

    def test_example2(self, ex2):
        assert sp.real_axis_unstable_root(ex2, 5).root == pytest.approx(EX2_ROOT, abs=1e-12)

    def test_open_loop_unstable_pde(self):
        p = decoupled(lam=10.0)
        assert sp.real_axis_unstable_root(p, 5).root == pytest.approx(10 - np.pi ** 2, abs=1e-12)


class TestVerdict:
    def test_unstable(self, scalar_unstable):
        v = sp.verdict_spectral(scalar_unstable)
        assert v.kind is VerdictKind.UNSTABLE
        assert v.evidence["rightmost"] == pytest.approx(SCALAR_ROOT)

    def test_stable(self, scalar_stable):
        v = sp.verdict_spectral(scalar_stable, sp.SearchRegion(-0.01, 10, -50, 50))
        assert v.kind is VerdictKind.STABLE_INDICATED

    def test_decoupled_hurwitz(self):
        p = SystemParams(A=[[-1, 2], [0, -3]], B=[0, 0], C=[1, 1], nu=1, lam=0, theta_i=1, theta_o=0.5)
        assert sp.verdict_spectral(p).kind is VerdictKind.STABLE_INDICATED

    def test_marginal_is_inconclusive(self):
        assert sp.verdict_spectral(scalar_example(-1.0, -1.0)).kind is VerdictKind.INCONCLUSIVE

    def test_threshold_sharpness(self):
        lo, hi = -1.5, -0.5
        unst = lambda a: sp.verdict_spectral(scalar_example(a, -1.0)).kind is VerdictKind.UNSTABLE  # noqa: E731
        assert unst(hi) and not unst(lo)
        while hi - lo > 1e-6:
            mid = (lo + hi) / 2
            if unst(mid):
                hi = mid
            else:
                lo = mid
        assert lo <= -1.0 + 1e-6 and hi >= -1.0 - 1e-6
        assert abs((lo + hi) / 2 + 1.0) <= 1e-6

    def test_scalar_threshold_formula(self):
        assert sp.scalar_threshold(-1.0) == pytest.approx(-1.0)
        assert sp.scalar_threshold(-1.0, lam=-1.0) == pytest.approx(-1 / np.sinh(1.0))


class TestEigenfunction:
    def test_pde_mode(self):
        p = decoupled()
        ef = sp.eigenfunction(p, -np.pi ** 2)
        assert np.all(ef.X == 0)
        th = np.linspace(0, 1, 9)
        ratio = ef.Z(th[1:-1]) / np.sin(np.pi * (1 - th[1:-1]))
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
        assert ef.norm() == pytest.approx(1.0)

    def test_scalar(self, scalar_unstable):
        root = sp.find_roots(scalar_unstable, sp.SearchRegion(0.1, 2, -1, 1))[0]
        ef = sp.eigenfunction(scalar_unstable, root)
        assert abs(ef.Z(0.0) / ef.X[0] - 1.0) < 1e-10
        res = ef.residuals()
        assert max(res.values()) < 1e-8

    def test_example2(self, ex2):
        ef = sp.eigenfunction(ex2, sp.rightmost_root(ex2))
        res = ef.residuals()
        assert res["ode"] < 1e-8 and res["pde"] < 1e-8
        assert res["bc0"] < 1e-10 and res["bc1"] < 1e-10

    def test_complex_root(self):
        p = example2(input_sign=1.0)
        ef = sp.eigenfunction(p, sp.rightmost_root(p))
        assert max(ef.residuals().values()) < 1e-8

    def test_degenerate(self):
        p = SystemParams(A=[[0.0, 0.0], [0.0, -1.0]], B=[1.0, 0.0], C=[0.0, 1.0], nu=1, lam=0,
                         theta_i=1, theta_o=1)
        with pytest.raises(sp.DegenerateRoot):
            sp.eigenfunction(p, 0.0)

    def test_multiple_rejected(self, scalar_unstable):
        rec = sp.RootRecord(s=SCALAR_ROOT, residual=0.0, multiplicity=2)
        with pytest.raises(sp.DegenerateRoot):
            sp.eigenfunction(scalar_unstable, rec)


class TestBmax:
    def test_lambda_zero(self):
        assert sp.inverse_b_max(0.0, 1.0, 1.0) == pytest.approx(1 / 6, abs=1e-12)
        assert sp.inverse_b_max(0.0, 1.0, 1.0, method="closed_form") == pytest.approx(1 / 6, abs=1e-12)

    @pytest.mark.parametrize("lam", [-1.0, 2.0])
    def test_routes_agree(self, lam):
        a = sp.inverse_b_max(lam, 1.0, 1.0)
        b = sp.inverse_b_max(lam, 1.0, 1.0, method="closed_form")
        assert a == pytest.approx(b, rel=1e-10)
        ref = {-1.0: 0.13318369960497636, 2.0: 0.2780170927961934}[lam]
        assert a == pytest.approx(ref, rel=1e-12)

    def test_general_theta(self):
        assert sp.inverse_b_max(0.0, 2.0, 3.0) == pytest.approx(3 / 12, rel=1e-12)
