import numpy as np
import pytest

from rdinstab import sdp
from rdinstab.errors import InvalidParameters
from sdp_problems import check_farkas, check_feasible, random_problem, sym


def pencil(G0, *G):
    return sdp.PencilConstraint(np.atleast_2d(G0).astype(float), np.array([np.atleast_2d(g) for g in G], float))


def test_scalar_feasible():
    out = sdp.solve([pencil(-1.0, 1.0)], eps=1e-6)
    assert out.feasible and out.primal_margin >= 1e-6
    assert out.y[0] - 1 == pytest.approx(out.primal_margin)


def test_scalar_farkas():
    out = sdp.solve([pencil(0.0, 1.0), pencil(-1.0, -1.0)])
    assert out.infeasible
    z = [float(Z[0, 0]) for Z in out.dual_certificate]
    np.testing.assert_allclose(z, [0.5, 0.5], atol=1e-8)
    assert out.dual_margin == pytest.approx(0.5, abs=1e-8)


def test_equality_forces_infeasible():
    out = sdp.solve([pencil(np.eye(2), [[0, 1], [1, 0]])], equalities=([[1.0]], [2.0]))
    assert out.infeasible


def test_equality_feasible():
    out = sdp.solve([pencil(np.eye(2), [[0, 1], [1, 0]])], equalities=([[1.0]], [0.5]))
    assert out.feasible and out.y[0] == pytest.approx(0.5)


def test_no_variables_after_equalities():
    out = sdp.solve([pencil(np.eye(2), np.diag([1.0, -1.0]))], equalities=([[1.0]], [0.25]))
    assert out.feasible
    assert out.primal_margin == pytest.approx(0.75)


def test_validation():
    with pytest.raises(InvalidParameters):
        sdp.PencilConstraint(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((1, 2, 2)))
    with pytest.raises(InvalidParameters):
        sdp.solve([pencil(0.0, 1.0), pencil(0.0, 1.0, 1.0)])
    with pytest.raises(InvalidParameters):
        sdp.solve([pencil(0.0, 1.0, 0.0)], equalities=([[1.0, 0.0], [1.0, 0.0]], [0.0, 1.0]))


def test_deterministic(rng):
    cons, eq = random_problem(rng)
    a, b = sdp.solve(cons, eq), sdp.solve(cons, eq)
    assert a.status == b.status
    if a.y is not None:
        np.testing.assert_array_equal(a.y, b.y)


@pytest.mark.parametrize("factor", [1e-3, 1e3])
def test_scale_invariance(rng, factor):
    for _ in range(20):
        cons, eq = random_problem(rng)
        base = sdp.solve(cons, eq)
        scaled = [sdp.PencilConstraint(factor * c.G0, factor * c.G) for c in cons]
        out = sdp.solve(scaled, eq)
        if base.status is not sdp.FeasibilityStatus.UNKNOWN and abs(base.t_star) > 1e-3:
            assert out.status == base.status


def test_random_outcomes_verified(rng):
    for _ in range(40):
        cons, eq = random_problem(rng)
        out = sdp.solve(cons, eq)
        assert out.status is not sdp.FeasibilityStatus.UNKNOWN
        if out.feasible:
            assert check_feasible(cons, eq, out, 1e-7)
        else:
            assert check_farkas(cons, eq, out)


def _grid_margin(cons, box, h):
    g = np.arange(-box, box + h / 2, h)
    Y1, Y2 = np.meshgrid(g, g, indexing="ij")
    y = np.stack([Y1.ravel(), Y2.ravel()], axis=1)
    best = -np.inf
    for chunk in np.array_split(y, 20):
        m = np.full(len(chunk), np.inf)
        for c in cons:
            M = c.G0 + np.einsum("pk,kij->pij", chunk, c.G)
            m = np.minimum(m, np.linalg.eigvalsh(M)[:, 0])
        best = max(best, m.max())
    return best


def test_brute_force_agreement(rng):
    box, h = 10.0, 2e-2
    # box pencil keeps the solver on the same domain as the grid
    boxcon = sdp.PencilConstraint(box * np.eye(4), np.array([np.diag([-1.0, 1, 0, 0]), np.diag([0, 0, -1.0, 1])]))
    checked = 0
    for _ in range(8):
        d = int(rng.integers(1, 4))
        G = np.array([sym(rng, d), sym(rng, d)])
        c = sdp.PencilConstraint(sym(rng, d) + rng.normal() * np.eye(d), G)
        cons = [c, boxcon]
        out = sdp.solve(cons)
        grid = _grid_margin(cons, box, h)
        lip = sum(np.linalg.norm(Gi, 2) for Gi in G) + 1.0
        band = lip * h
        if abs(grid) <= band:
            continue
        checked += 1
        assert out.feasible == (grid > 0)
        assert out.infeasible == (grid < 0)
    assert checked >= 4


def test_dump_sdpa(tmp_path):
    cons = [pencil(np.eye(2), [[0, 1], [1, 0]])]
    path = tmp_path / "p.dat-s"
    sdp.dump_sdpa(path, cons, ([[1.0]], [2.0]))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("1 ") and lines[1].startswith("2 ")
    assert lines[2].split() == ["2", "-2"]
    entries = [l.split() for l in lines[4:]]
    assert ["0", "1", "1", "1", "-1"] in entries
    assert ["1", "1", "1", "2", "1"] in entries
