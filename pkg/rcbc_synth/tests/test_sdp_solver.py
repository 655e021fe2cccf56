import numpy as np
import pytest

from src.errors import DimensionMismatch, NumericalFailure
from src.polynomial import Polynomial, build_dictionary
from src.sdp_problem import SdpBuilder
from src.sdp_solver import FEASIBLE, INFEASIBLE, OPTIMAL, SdpSolver, check_kkt, find_external_solver, solve_external
from src.sdpa_format import export_sdpa
from src.sos_compiler import sos_feasibility_problem


def _max_eigenvalue_problem(A):
    """min t  s.t.  tI − A = X ⪰ 0"""
    n = A.shape[0]
    builder = SdpBuilder()
    builder.add_block('X', n)
    builder.add_free('t', ['t'])
    for p in range(n):
        for q in range(p, n):
            builder.add_equality([(0, p, q, 1.0)], [(0, -1.0)] if p == q else [], -A[p, q])
    builder.add_objective(free_terms=[(0, 1.0)])
    return builder.build()


def test_max_eigenvalue_diagonal():
    """測試 diag(1,2,3) 的最大特徵值"""
    solution = SdpSolver().solve(_max_eigenvalue_problem(np.diag([1.0, 2.0, 3.0])))
    assert solution.status == OPTIMAL
    assert solution.free('t')[0] == pytest.approx(3.0, abs=1e-6)
    assert solution.primal_objective == pytest.approx(3.0, abs=1e-6)


def test_max_eigenvalue_random_matches_eigvalsh():
    """測試隨機對稱矩陣的最大特徵值與 eigvalsh 一致"""
    rng = np.random.default_rng(5)
    M = rng.normal(size=(5, 5))
    A = (M + M.T) / 2
    problem = _max_eigenvalue_problem(A)
    solution = SdpSolver().solve(problem)
    assert solution.is_success
    assert solution.primal_objective == pytest.approx(np.linalg.eigvalsh(A)[-1], abs=1e-6)
    report = check_kkt(problem, solution)
    assert report.max_residual() < 1e-6
    assert report.min_primal_eig > -1e-8 and report.min_dual_eig > -1e-8


def test_scale_invariance():
    """測試約束整體縮放後目標值不變"""
    rng = np.random.default_rng(6)
    M = rng.normal(size=(4, 4))
    problem = _max_eigenvalue_problem((M + M.T) / 2)
    base = SdpSolver().solve(problem).primal_objective
    for factor in (1e-3, 1e3):
        assert SdpSolver().solve(problem.scaled(factor)).primal_objective == pytest.approx(base, abs=1e-5)


def test_sos_feasible_polynomial():
    """測試 x⁴ − x² + 1 為 SOS，且 Gram 矩陣重建原多項式"""
    x = Polynomial.variable(1, 0)
    target = x * x * x * x - x * x + 1.0
    basis = build_dictionary(1, 2, include_constant=True)
    problem = sos_feasibility_problem(target, basis)
    solution = SdpSolver().solve(problem)
    assert solution.status == FEASIBLE
    Q = solution.block('Q')
    assert np.linalg.eigvalsh(Q)[0] > -1e-8
    for point in np.linspace(-2, 2, 9):
        z = basis.evaluate(np.array([point]))
        assert z @ Q @ z == pytest.approx(target.evaluate(np.array([point])), abs=1e-6)


def test_sos_infeasible_polynomial():
    """測試 −x² 不是 SOS"""
    x = Polynomial.variable(1, 0)
    problem = sos_feasibility_problem(-1.0 * (x * x), build_dictionary(1, 1, include_constant=True))
    try:
        solution = SdpSolver(max_iter=100).solve(problem)
    except NumericalFailure:
        return
    assert not solution.is_success
    assert solution.status == INFEASIBLE or np.linalg.eigvalsh(solution.block('Q'))[0] < -1e-6 \
        or solution.residuals['primal'] > 1e-7


def test_empty_problem_rejected():
    """測試沒有任何區塊與約束的問題"""
    with pytest.raises(DimensionMismatch):
        SdpSolver().solve(SdpBuilder().build())


def test_solver_from_settings():
    """測試由設定檔建立求解器"""
    solver = SdpSolver.from_settings({'solver': {'tol': 1e-9, 'max_iter': 50}})
    assert solver.tol == 1e-9 and solver.max_iter == 50
    assert SdpSolver.from_settings({}).tol == 1e-7


def test_solution_summary():
    """測試求解結果摘要欄位"""
    solution = SdpSolver().solve(_max_eigenvalue_problem(np.eye(2)))
    summary = solution.summary()
    assert summary['status'] == OPTIMAL
    assert {'primal', 'dual', 'gap'} <= set(summary['residuals'])


@pytest.mark.skipif(find_external_solver() is None, reason="未安裝 sdpa 或 csdp")
def test_external_solver_agrees(tmp_path):
    """測試外部求解器與內建求解器的目標值一致（差一個負號）"""
    problem = _max_eigenvalue_problem(np.diag([1.0, 2.0, 3.0]))
    path = str(tmp_path / 'eig.dat-s')
    export_sdpa(problem, path)
    values = solve_external(path)
    internal = SdpSolver().solve(problem).primal_objective
    assert abs(abs(values['primal']) - abs(internal)) < 1e-4


def test_weak_duality_along_iterates():
    """測試每次迭代 pobj − dobj = ⟨X,S⟩ + 殘差項，且可行迭代點滿足弱對偶"""
    rng = np.random.default_rng(11)
    M = rng.normal(size=(5, 5))
    solver = SdpSolver(tol=1e-7)
    solution = solver.solve(_max_eigenvalue_problem((M + M.T) / 2))
    assert solution.status == OPTIMAL
    history = solution.history
    assert len(history) == solution.iterations + 1
    assert [entry['iteration'] for entry in history] == list(range(len(history)))

    accepted = 0
    for entry in history:
        scale = 1.0 + abs(entry['pobj']) + abs(entry['dobj'])
        assert entry['complementarity'] > 0
        assert entry['pobj'] - entry['dobj'] == pytest.approx(
            entry['complementarity'] + entry['infeasibility'],
            abs=1e-8 * (scale + entry['complementarity'] + abs(entry['infeasibility'])))
        if entry['primal'] <= solver.tol and entry['dual'] <= solver.tol:
            accepted += 1
            assert entry['pobj'] >= entry['dobj'] - 1e-6 * scale
    assert accepted >= 1
    assert history[-1]['pobj'] == solution.primal_objective
