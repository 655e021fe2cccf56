import os
import re

import numpy as np
import pytest

from src.certificate import extract_controller
from src.errors import BasisTooSmall, ConfigError, DegreeError, RankError, RegionError
from src.plant import DisturbanceSpec, ExcitationSpec, GroundTruthSystem, collect_trajectory
from src.polynomial import Dictionary, Monomial, PolyMatrix, Polynomial, build_dictionary
from src.regions import STATE, Region
from src.sdp_problem import SdpBuilder
from src.sdp_solver import SdpSolver
from src.sos_compiler import (build_feasibility_program, build_level_set_program, build_sos_problem,
                              default_transform, gram_parameterize, resolve_degrees, sos_feasibility_problem)

SRC_DIR = os.path.join(os.path.dirname(__file__), '..', 'src')


def _data(sys, r_dict, g_dict, T, delta=1e-4, seed=0, amplitude=10.0):
    return collect_trajectory(sys, np.full(sys.n, 0.4), ExcitationSpec.symmetric(amplitude, sys.m),
                              DisturbanceSpec(delta), T, seed, r_dict, g_dict)


def _academic():
    r_dict = build_dictionary(2, 3)
    g_dict = build_dictionary(2, 3, include_constant=True)
    return _data(GroundTruthSystem.academic(), r_dict, g_dict, 14), r_dict, g_dict


def _scalar():
    """x⁺ = 0.5x + u + w"""
    r_dict = Dictionary([Monomial((1,))], Dictionary.R, 1)
    g_dict = build_dictionary(1, 0, include_constant=True)
    sys = GroundTruthSystem(np.array([[0.5]]), np.array([[1.0]]), r_dict, PolyMatrix.from_numeric([[1.0]], 1))
    return _data(sys, r_dict, g_dict, 4, delta=1e-6, seed=3, amplitude=1.0), r_dict, g_dict


def test_academic_block_size_and_degrees():
    """測試學術範例：矩陣大小 23，deg_H 提高到 2"""
    data, r_dict, g_dict = _academic()
    program = build_feasibility_program(data, default_transform(r_dict), g_dict,
                                        Region.from_json([[-10, 10], [-10, 10]], STATE), 0.99, 1.15,
                                        require_rank=False)
    assert program.block_size == 23
    assert program.degrees.deg_H == 2
    assert program.degrees.deg_varpi == 4
    assert program.degrees.gram_degree == 3
    summary = program.summary()
    assert summary['gram_block_size'] == 230
    assert summary['N'] == 9 and summary['N_hat'] == 10


def test_raised_deg_h_gives_cubic_controller():
    """測試學術範例 deg_H 自動提高到 2 時，控制器 u = U0T·H(x)·P·x 的次數為 deg_H + 1 = 3"""
    data, r_dict, g_dict = _academic()
    program = build_feasibility_program(data, default_transform(r_dict), g_dict,
                                        Region.from_json([[-10, 10], [-10, 10]], STATE), 0.99, 1.15,
                                        require_rank=False)
    assert max(mono.degree for mono in program.h_monomials) == program.degrees.deg_H == 2
    rng = np.random.default_rng(3)
    H = PolyMatrix.from_coefficient_matrices({mono: rng.normal(size=(program.T, 2)) for mono in program.h_monomials},
                                             program.T, 2, 2)
    controller = extract_controller(H, np.array([[2.0, 0.3], [0.3, 1.0]]), program.U0T)
    assert controller.max_degree == program.degrees.deg_H + 1 == 3
    degrees = {mono.degree for mono in controller[0, 0].monomials()}
    assert degrees == {1, 2, 3}


def test_lorenz_block_size():
    """測試 Lorenz 範例：矩陣大小 16"""
    r_dict = build_dictionary(3, 2)
    g_dict = build_dictionary(3, 0, include_constant=True)
    data = _data(GroundTruthSystem.lorenz(), r_dict, g_dict, 15)
    program = build_feasibility_program(data, default_transform(r_dict), g_dict,
                                        Region.from_json([[-15, 15]] * 3, STATE), 0.99, 1.15, require_rank=False)
    assert program.block_size == 16
    assert program.degrees.deg_H == 1
    assert program.degrees.gram_degree == 2
    assert program.summary()['gram_block_size'] == 160


def test_explicit_low_deg_h_rejected():
    """測試明確指定的 deg_H 低於 L(x) 次數時拋出 DegreeError"""
    data, r_dict, g_dict = _academic()
    with pytest.raises(DegreeError):
        build_feasibility_program(data, default_transform(r_dict), g_dict,
                                  Region.from_json([[-10, 10], [-10, 10]], STATE), 0.99, 1.15, deg_H=1,
                                  require_rank=False)


def test_resolve_degrees_validation():
    """測試次數設定的檢查"""
    transform = default_transform(build_dictionary(2, 2))
    g_dict = build_dictionary(2, 0, include_constant=True)
    with pytest.raises(DegreeError):
        resolve_degrees(transform, g_dict, deg_alpha=1)
    with pytest.raises(DegreeError):
        resolve_degrees(transform, g_dict, deg_varpi=3)
    with pytest.raises(DegreeError):
        resolve_degrees(transform, g_dict, gram_degree=1)
    degrees = resolve_degrees(transform, g_dict)
    assert degrees.deg_H == 1 and degrees.gram_degree == 2


def test_program_argument_validation():
    """測試 λ、π、狀態集與秩條件的檢查"""
    data, r_dict, g_dict = _scalar()
    transform = default_transform(r_dict)
    box = Region.from_json([[-2, 2]], STATE)
    with pytest.raises(ConfigError):
        build_feasibility_program(data, transform, g_dict, box, 1.5, 1.0)
    with pytest.raises(ConfigError):
        build_feasibility_program(data, transform, g_dict, box, 0.9, 0.0)
    union = Region.from_json([[[-2, 0]], [[1, 2]]], STATE)
    with pytest.raises(RegionError):
        build_feasibility_program(data, transform, g_dict, union, 0.9, 1.0)
    data.R0T = np.zeros_like(data.R0T)
    with pytest.raises(RankError):
        build_feasibility_program(data, transform, g_dict, box, 0.9, 1.0)


def test_gram_basis_too_small():
    """測試 Gram 基底無法表示目標多項式"""
    x = Polynomial.variable(1, 0)
    with pytest.raises(BasisTooSmall):
        sos_feasibility_problem(x * x * x * x, build_dictionary(1, 1, include_constant=True))


def test_gram_matrix_polynomial_roundtrip():
    """測試 2×2 多項式矩陣的 Gram 表示可重建原矩陣"""
    x = Polynomial.variable(1, 0)
    target = PolyMatrix([[x * x + 1.0, x], [x, x * x + 2.0]], 1)
    basis = build_dictionary(1, 1, include_constant=True)
    solution = SdpSolver().solve(sos_feasibility_problem(target, basis))
    assert solution.is_success
    Q = solution.block('Q')
    assert np.linalg.eigvalsh(Q)[0] > -1e-8
    for point in np.linspace(-3, 3, 7):
        z = basis.evaluate(np.array([point]))
        lift = np.kron(np.eye(2), z.reshape(-1, 1))
        np.testing.assert_allclose(lift.T @ Q @ lift, target.evaluate(np.array([point])), atol=1e-6)


def test_gram_parameterize_constraint_count():
    """測試每個上三角元素、每個乘積單項式各一條等式"""
    builder = SdpBuilder()
    basis = build_dictionary(1, 1, include_constant=True)
    gram_parameterize(builder, 'Q', {}, 2, basis)
    # 乘積單項式 {1, x, x²}，上三角元素 3 個
    assert builder.num_constraints == 9
    assert builder.build().block_sizes == [4]


def test_scalar_synthesis_gram_roundtrip_and_coupling():
    """測試純量系統合成：Gram 重建 M(x)、耦合等式 R0T·H(x) = L(x)·Z"""
    data, r_dict, g_dict = _scalar()
    transform = default_transform(r_dict)
    region = Region.from_json([[-2, 2]], STATE)
    program, problem = build_sos_problem(data, transform, g_dict, region, 0.99, 1.15)
    assert program.block_size == 4
    solution = SdpSolver().solve(problem)
    assert solution.is_success
    values = program.extract(solution)
    assert np.linalg.eigvalsh(values['Z'])[0] >= program.eps_pd * (1 - 1e-6)
    for x in np.linspace(-2, 2, 9):
        point = np.array([x])
        M = program.evaluate_matrix(values, point)
        np.testing.assert_allclose(program.gram_reconstruct(values['gram'], point), M, atol=1e-5)
        assert np.linalg.eigvalsh(M)[0] > -1e-5
        coupling = data.R0T @ values['H'].evaluate(point)
        np.testing.assert_allclose(coupling, transform.evaluate(point) @ values['Z'], atol=1e-6)


def test_level_set_program_blocks():
    """測試等高集 S-procedure 問題：每個盒子一個 Gram 區塊與 n 個乘子"""
    region = Region.from_json([[[-5, -3], [-5, -3]], [[2, 5], [2, 5]]], 'unsafe')
    problem = build_level_set_program(np.eye(2), region, 'unsafe')
    assert problem.num_free == 1
    assert sorted(problem.block_names) == sorted(
        [f'sigma_{b}_{i}' for b in range(2) for i in range(2)] + ['gram_0', 'gram_1'])
    with pytest.raises(ConfigError):
        build_level_set_program(np.eye(2), region, 'state')


def test_synthesis_modules_never_touch_ground_truth():
    """測試合成相關模組不讀取真實系統參數或隱藏擾動"""
    pattern = re.compile(r'\.A\b|\.B\b|W_hidden|GroundTruthSystem|simulate_step|simulate_batch')
    for name in ('sos_compiler.py', 'sdp_problem.py', 'sdp_solver.py', 'sdpa_format.py', 'certificate.py'):
        with open(os.path.join(SRC_DIR, name), encoding='utf-8') as f:
            source = f.read()
        assert not pattern.search(source), name
