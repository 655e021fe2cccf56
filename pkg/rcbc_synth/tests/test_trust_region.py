import numpy as np
import pytest

from src.trust_region import TrustRegionSolver, worst_case_disturbance


def _random_spd(rng, n):
    M = rng.normal(size=(n, n))
    return M @ M.T + n * np.eye(n)


def _ball_samples(rng, n, delta, count):
    directions = rng.normal(size=(count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.sqrt(delta) * rng.uniform(size=count) ** (1.0 / n)
    return directions * radii[:, None]


@pytest.mark.parametrize('rho_scale', [1.9, 0.5])
def test_trust_region_dominates_samples(rho_scale):
    """測試精確解不小於球內 1000 個隨機擾動的目標值（凹與非凹兩種情況）"""
    rng = np.random.default_rng(11)
    for n in (2, 3):
        P = _random_spd(rng, n)
        rho = rho_scale * float(np.linalg.eigvalsh(P)[-1])
        solver = TrustRegionSolver(P, rho)
        for _ in range(5):
            x_hat = rng.uniform(-3, 3, size=n)
            delta = float(rng.uniform(1e-4, 2.0))
            result = solver.solve(x_hat, delta)
            assert result.w @ result.w <= delta * (1 + 1e-10)
            assert result.value == pytest.approx(solver.objective(x_hat, result.w), rel=1e-12)
            samples = _ball_samples(rng, n, delta, 1000)
            values = np.array([solver.objective(x_hat, w) for w in samples])
            assert np.all(values <= result.value + 1e-9 * (1 + abs(result.value)))


def test_trust_region_matches_boundary_scan():
    """測試二維非凹情況與球面細格點掃描一致"""
    P = np.array([[4.0, 1.0], [1.0, 2.0]])
    solver = TrustRegionSolver(P, 1.0)
    x_hat = np.array([0.7, -0.4])
    delta = 0.25
    result = solver.solve(x_hat, delta)
    assert result.on_boundary
    angles = np.linspace(0, 2 * np.pi, 200001)
    ws = np.sqrt(delta) * np.column_stack([np.cos(angles), np.sin(angles)])
    best = max(solver.objective(x_hat, w) for w in ws[::50])
    assert result.value >= best - 1e-9
    fine = np.max(np.einsum('ki,ij,kj->k', x_hat + ws, P, x_hat + ws) - delta)
    assert result.value == pytest.approx(fine, abs=1e-8)


def test_trust_region_zero_delta():
    """測試 δ = 0 時擾動為零"""
    P = np.eye(2)
    result = TrustRegionSolver(P, 2.0).solve(np.array([1.0, 2.0]), 0.0)
    np.testing.assert_array_equal(result.w, np.zeros(2))
    assert result.value == pytest.approx(5.0)
    assert not result.on_boundary


def test_trust_region_interior_solution():
    """測試 ρI − P 正定且無約束最大點在球內時回傳內部解"""
    P = np.eye(2)
    x_hat = np.array([0.1, 0.0])
    result = TrustRegionSolver(P, 2.0).solve(x_hat, 1.0)
    # max (x̂+w)ᵀ(x̂+w) − 2wᵀw 的極值點 w = x̂
    np.testing.assert_allclose(result.w, x_hat, atol=1e-14)
    assert not result.on_boundary
    assert result.value == pytest.approx(0.02)


def test_trust_region_hard_case():
    """測試 hard case：梯度在最小特徵方向的分量為零"""
    P = np.diag([3.0, 1.0])
    x_hat = np.array([0.0, 0.1])
    result = TrustRegionSolver(P, 2.0).solve(x_hat, 1.0)
    assert result.hard_case and result.on_boundary
    assert result.multiplier == pytest.approx(2.0)
    assert result.w @ result.w == pytest.approx(1.0, rel=1e-12)
    assert abs(result.w[1]) == pytest.approx(0.05, rel=1e-10)
    assert result.value == pytest.approx(1.015, rel=1e-12)


def test_worst_case_disturbance_helper():
    """測試便利函式與求解器一致"""
    P = np.array([[2.0, 0.3], [0.3, 1.0]])
    x_hat = np.array([1.0, -1.0])
    expected = TrustRegionSolver(P, 3.0).solve(x_hat, 0.01)
    got = worst_case_disturbance(P, 3.0, x_hat, 0.01)
    np.testing.assert_allclose(got.w, expected.w)
