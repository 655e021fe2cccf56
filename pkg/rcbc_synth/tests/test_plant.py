import numpy as np
import pytest

from src.errors import DimensionMismatch, RankError, RankRetryExhausted
from src.plant import (BOUNDARY, UNIFORM_BALL, DisturbanceSpec, ExcitationSpec, GroundTruthSystem,
                       TrajectoryCollector, TrajectoryData, check_rank, collect_trajectory, sample_disturbance,
                       simulate_batch, simulate_step, true_data_matrices)
from src.polynomial import Dictionary, Monomial, build_dictionary


def _academic_data(delta=2e-4, T=14, seed=0):
    sys = GroundTruthSystem.academic()
    return sys, collect_trajectory(sys, [0.3, -0.2], ExcitationSpec.symmetric(10.0, 1), DisturbanceSpec(delta), T,
                                   seed, build_dictionary(2, 3), build_dictionary(2, 3, include_constant=True))


def test_case_systems_dimensions():
    """測試兩個案例系統的維度"""
    academic = GroundTruthSystem.academic()
    assert (academic.n, academic.m) == (2, 1)
    lorenz = GroundTruthSystem.lorenz()
    assert (lorenz.n, lorenz.m) == (3, 1)
    assert GroundTruthSystem.from_config({'preset': 'lorenz'}).tau == pytest.approx(0.009)


def test_academic_step_matches_dynamics():
    """測試學術範例單步演化與動態方程式一致"""
    sys = GroundTruthSystem.academic()
    tau = sys.tau
    x = np.array([0.4, -0.7])
    u = np.array([1.3])
    w = np.array([1e-3, -2e-3])
    x1, x2 = x
    expected = np.array([
        x1 + tau * (-x1 + x1 * x2 + x2 * u[0]),
        x2 + tau * (x1 + 2 * x2 + x1 ** 2 + x1 ** 2 * x2 + u[0]),
    ]) + w
    np.testing.assert_allclose(simulate_step(sys, x, u, w), expected, rtol=1e-12)


def test_zero_state_is_equilibrium():
    """測試 x = 0、u = 0、w = 0 時停在原點"""
    for sys in (GroundTruthSystem.academic(), GroundTruthSystem.lorenz()):
        np.testing.assert_array_equal(simulate_step(sys, np.zeros(sys.n), np.zeros(sys.m), np.zeros(sys.n)),
                                      np.zeros(sys.n))


def test_simulate_batch_matches_single_step():
    """測試向量化演化與逐點演化一致"""
    sys = GroundTruthSystem.lorenz()
    rng = np.random.default_rng(4)
    states = rng.uniform(-5, 5, size=(30, 3))
    inputs = rng.uniform(-1, 1, size=(30, 1))
    noise = rng.uniform(-1e-2, 1e-2, size=(30, 3))
    batch = simulate_batch(sys, states, inputs, noise)
    for k in range(30):
        np.testing.assert_allclose(batch[k], simulate_step(sys, states[k], inputs[k], noise[k]), rtol=1e-12, atol=1e-12)


def test_simulate_step_dimension_mismatch():
    """測試維度不符時拋出例外"""
    sys = GroundTruthSystem.academic()
    with pytest.raises(DimensionMismatch):
        simulate_step(sys, np.zeros(3), np.zeros(1), np.zeros(2))


def test_disturbance_within_ball():
    """測試擾動取樣都在 wᵀw ≤ δ 內，boundary 模式落在球面"""
    dist = DisturbanceSpec(3e-4)
    rng = np.random.default_rng(7)
    for _ in range(200):
        w = sample_disturbance(dist, 3, UNIFORM_BALL, rng)
        assert w @ w <= dist.delta
    for _ in range(50):
        w = sample_disturbance(dist, 3, BOUNDARY, rng)
        assert w @ w <= dist.delta
        assert w @ w == pytest.approx(dist.delta, rel=1e-12)
    np.testing.assert_array_equal(sample_disturbance(DisturbanceSpec(0.0), 2, seed=1), np.zeros(2))


def test_collect_trajectory_shapes_and_continuity():
    """測試資料矩陣大小與軌跡連續性"""
    sys, data = _academic_data()
    assert data.U.shape == (1, 14)
    assert data.X0T.shape == (2, 14) and data.X1T.shape == (2, 14)
    assert data.R0T.shape == (9, 14)
    assert data.G0T.shape == (10, 14)
    np.testing.assert_array_equal(data.X0T[:, 1:], data.X1T[:, :-1])
    assert np.all(np.abs(data.U) <= 10.0)
    assert data.n == 2 and data.m == 1 and data.T == 14 and data.N == 9 and data.N_hat == 10


def test_data_consistency_with_true_dictionaries():
    """測試 X1T − A·R_true − B·G_true 等於隱藏的擾動序列"""
    for sys, delta in ((GroundTruthSystem.academic(), 2e-4), (GroundTruthSystem.lorenz(), 3e-4)):
        r_dict = build_dictionary(sys.n, 3 if sys.n == 2 else 2)
        g_dict = build_dictionary(sys.n, 3 if sys.n == 2 else 0, include_constant=True)
        data = collect_trajectory(sys, np.full(sys.n, 0.3), ExcitationSpec.symmetric(10.0, sys.m),
                                  DisturbanceSpec(delta), 15, 11, r_dict, g_dict)
        R_true, G_true = true_data_matrices(sys, data)
        residual = data.X1T - sys.A @ R_true - sys.B @ G_true
        np.testing.assert_allclose(residual, data.W_hidden, atol=1e-12)
        assert np.all(np.sum(residual ** 2, axis=0) <= delta * (1 + 1e-9))


def test_superset_dictionary_rows_match_true_rows():
    """測試合成字典包含真實單項式時，對應列與真實資料列相同"""
    sys, data = _academic_data()
    R_true, _ = true_data_matrices(sys, data)
    for i, mono in enumerate(sys.r_dictionary):
        np.testing.assert_allclose(data.R0T[data.r_dictionary.index(mono)], R_true[i], rtol=1e-14)


def test_zero_delta_gives_zero_disturbances():
    """測試 δ = 0 時隱藏擾動全為零"""
    _, data = _academic_data(delta=0.0)
    np.testing.assert_array_equal(data.W_hidden, np.zeros((2, 14)))


def test_check_rank():
    """測試秩條件檢查"""
    points = np.random.default_rng(2).uniform(-2, 2, size=(2, 14))
    R0T = build_dictionary(2, 3).evaluate_columns(points)
    assert check_rank(R0T).full_row_rank
    square = check_rank(R0T[:, :9])
    assert not square.full_row_rank and 'T=9' in square.reason
    duplicated = np.vstack([R0T[:-1], R0T[:1]])
    assert not check_rank(duplicated).full_row_rank


def test_check_rank_monotone_in_samples():
    """測試逐欄加入樣本時 σ_N 不減，且一旦列滿秩就維持列滿秩"""
    points = np.random.default_rng(4).uniform(-2, 2, size=(2, 30))
    R0T = build_dictionary(2, 3).evaluate_columns(points)
    N = R0T.shape[0]
    reports = [check_rank(R0T[:, :T]) for T in range(1, 31)]
    assert not any(report.full_row_rank for report in reports[:N])
    first = next(T for T, report in enumerate(reports, start=1) if report.full_row_rank)
    assert first == N + 1
    assert all(report.full_row_rank for report in reports[first - 1:])
    sigma_n = [report.singular_values[N - 1] for report in reports[N - 1:]]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(sigma_n, sigma_n[1:]))


def test_collector_refuses_short_horizon():
    """測試 T ≤ N 時在收集前拒絕"""
    sys = GroundTruthSystem.academic()
    collector = TrajectoryCollector(sys, build_dictionary(2, 3), build_dictionary(2, 3, include_constant=True))
    with pytest.raises(RankError):
        collector.collect_with_retries([0.3, -0.2], ExcitationSpec.symmetric(10.0, 1), DisturbanceSpec(2e-4), 9, 0)


def test_collector_retries_exhausted():
    """測試在平衡點上收集永遠無法達到列滿秩"""
    sys = GroundTruthSystem.academic()
    collector = TrajectoryCollector(sys, build_dictionary(2, 3), build_dictionary(2, 3, include_constant=True),
                                    max_retries=3)
    silent = ExcitationSpec((0.0,), (0.0,))
    with pytest.raises(RankRetryExhausted):
        collector.collect_with_retries([0.0, 0.0], silent, DisturbanceSpec(0.0), 14, 0)


def test_collector_success_records_attempts():
    """測試收集成功時記錄嘗試次數與種子"""
    sys = GroundTruthSystem.academic(tau=0.05)
    collector = TrajectoryCollector(sys, build_dictionary(2, 3), build_dictionary(2, 3, include_constant=True))
    data = collector.collect_with_retries([0.5, -0.8], ExcitationSpec.symmetric(10.0, 1), DisturbanceSpec(2e-4), 14, 5)
    assert data.attempts >= 1
    assert data.seed == 5 + data.attempts - 1
    assert check_rank(data.R0T).full_row_rank


def test_trajectory_save_and_load(tmp_path):
    """測試資料寫出後讀回完全一致，且預設不輸出隱藏擾動"""
    _, data = _academic_data()
    data.save(str(tmp_path / 'plain'))
    assert not (tmp_path / 'plain' / 'W_hidden.csv').exists()
    loaded = TrajectoryData.load(str(tmp_path / 'plain'))
    for name in ('U', 'X0T', 'X1T', 'R0T', 'G0T'):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(data, name))
    assert loaded.W_hidden is None
    assert loaded.r_dictionary == data.r_dictionary
    assert loaded.delta == data.delta

    data.save(str(tmp_path / 'artifacts'), test_artifacts=True)
    with_w = TrajectoryData.load(str(tmp_path / 'artifacts'))
    np.testing.assert_array_equal(with_w.W_hidden, data.W_hidden)


def test_excitation_spec_json():
    """測試激勵訊號設定的 JSON 格式"""
    spec = ExcitationSpec((-20.0,), (20.0,))
    assert ExcitationSpec.from_json(spec.to_json()) == spec
    samples = spec.sample(np.random.default_rng(0), 100)
    assert samples.shape == (1, 100) and np.all(np.abs(samples) <= 20.0)


def test_custom_system_from_config():
    """測試以明確的 A、B 與字典建立系統"""
    r_dict = Dictionary([Monomial((1,))], Dictionary.R, 1)
    config = {'A': [[0.5]], 'B': [[1.0]], 'r_dictionary': r_dict.to_json(),
              'g_matrix': [[[{'exponents': [0], 'coeff': 1.0}]]]}
    sys = GroundTruthSystem.from_config(config)
    np.testing.assert_allclose(simulate_step(sys, [2.0], [1.0], [0.0]), [2.0])
