"""
原始-對偶內點法 SDP 求解器（HKM 對稱化搜尋方向，Mehrotra 預測-校正）

原始問題:  min ⟨C,X⟩ + dᵀz   s.t. 𝒜X + Fz = b, X ⪰ 0
對偶問題:  max bᵀy          s.t. 𝒜*y + S = C, Fᵀy = d, S ⪰ 0
"""
import logging
import re
import shutil
import subprocess
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import DimensionMismatch, NumericalFailure
from .sdp_problem import SdpProblem

OPTIMAL = 'optimal'
FEASIBLE = 'feasible'
INFEASIBLE = 'infeasible'
MAX_ITER = 'max_iter'
NUMERICAL_FAILURE = 'numerical_failure'

MIN_STEP = 1e-12


@dataclass
class SdpSolution:
    status: str
    X: List[np.ndarray]
    S: List[np.ndarray]
    y: np.ndarray
    z: np.ndarray
    primal_objective: float = 0.0
    dual_objective: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    block_names: List[str] = field(default_factory=list)
    symbols: Dict[str, tuple] = field(default_factory=dict)
    # 每次迭代的 pobj、dobj、⟨X,S⟩ 與殘差
    history: List[dict] = field(default_factory=list)

    @property
    def is_success(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE)

    def block(self, name: str) -> np.ndarray:
        return self.X[self.block_names.index(name)]

    def free(self, name: str) -> np.ndarray:
        kind, start, count = self.symbols[name][:3]
        return self.z[start:start + count]

    def summary(self) -> dict:
        return {
            'status': self.status,
            'iterations': self.iterations,
            'primal_objective': self.primal_objective,
            'dual_objective': self.dual_objective,
            'residuals': dict(self.residuals),
        }


@dataclass
class KktReport:
    primal_residual: float
    dual_residual: float
    free_dual_residual: float
    gap: float
    min_primal_eig: float
    min_dual_eig: float

    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.free_dual_residual, abs(self.gap))


class _BlockStructure:
    """某一區塊的約束結構，供 Schur 補矩陣分批組裝"""

    def __init__(self, problem: SdpProblem, blk: int, chunk_size: int):
        size = problem.block_sizes[blk]
        mask = problem.con_block == blk
        k, i, j, v = (problem.con_index[mask], problem.con_row[mask], problem.con_col[mask], problem.con_value[mask])
        off = i != j
        # 展開成有序對 (i,j) 與 (j,i)
        k_full = np.concatenate([k, k[off]])
        i_full = np.concatenate([i, j[off]])
        j_full = np.concatenate([j, i[off]])
        v_full = np.concatenate([v, v[off]])
        self.size = size
        self.flat = sp.csr_matrix((v_full, (k_full, i_full * size + j_full)),
                                  shape=(problem.num_constraints, size * size))

        order = np.argsort(k_full, kind='stable')
        k_sorted, i_sorted, j_sorted, v_sorted = k_full[order], i_full[order], j_full[order], v_full[order]
        constraints, starts, counts = np.unique(k_sorted, return_index=True, return_counts=True)
        # 依非零個數排序後分批，讓每批的補齊長度接近
        by_count = np.argsort(counts, kind='stable')
        self.chunks = []
        for c0 in range(0, len(constraints), chunk_size):
            sel = by_count[c0:c0 + chunk_size]
            width = int(counts[sel].max())
            rows = np.zeros((len(sel), width), dtype=np.int64)
            cols = np.zeros((len(sel), width), dtype=np.int64)
            vals = np.zeros((len(sel), width))
            for r, idx in enumerate(sel):
                s, c = starts[idx], counts[idx]
                rows[r, :c] = i_sorted[s:s + c]
                cols[r, :c] = j_sorted[s:s + c]
                vals[r, :c] = v_sorted[s:s + c]
            self.chunks.append((constraints[sel], rows, cols, vals))


def _sym(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """X + α dX ⪰ 0 的最大 α（上限為無窮大）"""
    L = la.cholesky(X, lower=True)
    tmp = la.solve_triangular(L, dX, lower=True)
    tmp = la.solve_triangular(L, tmp.T, lower=True)
    lam_min = float(la.eigvalsh(_sym(tmp))[0])
    return np.inf if lam_min >= 0 else -1.0 / lam_min


class SdpSolver:
    """內建的原始-對偶路徑追蹤求解器"""

    def __init__(self, tol: float = 1e-7, max_iter: int = 200, reg_init: float = 1e-9, reg_max: float = 1e-5,
                 step_fraction: float = 0.98, chunk_size: int = 256):
        self.tol = tol
        self.max_iter = max_iter
        self.reg_init = reg_init
        self.reg_max = reg_max
        self.step_fraction = step_fraction
        self.chunk_size = chunk_size
        self.logger = logging.getLogger('SdpSolver')

    @classmethod
    def from_settings(cls, settings: dict) -> 'SdpSolver':
        section = (settings or {}).get('solver', {})
        return cls(
            tol=section.get('tol', 1e-7),
            max_iter=section.get('max_iter', 200),
            reg_init=section.get('reg_init', 1e-9),
            reg_max=section.get('reg_max', 1e-5),
            step_fraction=section.get('step_fraction', 0.98),
            chunk_size=section.get('chunk_size', 256),
        )

    # ---- 內部工具 ----
    def _schur(self, structures: List[_BlockStructure], X: List[np.ndarray], W: List[np.ndarray],
               out: np.ndarray):
        """out[k, l] = tr(A_k W A_l X)"""
        for st, Xb, Wb in zip(structures, X, W):
            for cons, rows, cols, vals in st.chunks:
                left = np.transpose(Wb[:, rows] * vals[None, :, :], (1, 0, 2))  # c × s × P
                right = Xb[cols, :]  # c × P × s
                products = np.matmul(left, right).reshape(len(cons), -1)
                out[:, cons] += np.asarray(st.flat @ products.T)

    def _initial_point(self, problem: SdpProblem):
        m = problem.num_constraints
        norms = np.zeros(m)
        if m:
            weights = np.where(problem.con_row == problem.con_col, 1.0, 2.0)
            norms = np.sqrt(np.bincount(problem.con_index, weights=weights * problem.con_value ** 2, minlength=m))
        c_norm = float(np.sqrt(sum(np.sum(C ** 2) for C in problem.objective_blocks())))
        ratio = float(np.max((1.0 + np.abs(problem.rhs)) / (1.0 + norms))) if m else 1.0
        X, S = [], []
        for size in problem.block_sizes:
            xi = max(10.0, np.sqrt(size), size * ratio)
            eta = max(10.0, np.sqrt(size), float(norms.max()) if m else 0.0, c_norm)
            X.append(xi * np.eye(size))
            S.append(eta * np.eye(size))
        return X, S, np.zeros(m), np.zeros(problem.num_free)

    def _factor(self, K: np.ndarray, m: int, nf: int, scale: float):
        reg = self.reg_init
        while True:
            system = K.copy()
            idx = np.arange(m)
            system[idx, idx] += reg * scale
            if nf:
                fidx = np.arange(m, m + nf)
                system[fidx, fidx] -= reg * scale
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter('error', la.LinAlgWarning)
                    factor = la.lu_factor(system, overwrite_a=True, check_finite=False)
                if np.all(np.isfinite(factor[0])):
                    return factor
            except (la.LinAlgWarning, la.LinAlgError, ValueError):
                pass
            if reg * 2 > self.reg_max:
                raise la.LinAlgError(f"正則化已達上限 {self.reg_max:.1e} 仍無法分解")
            reg *= 2
            self.logger.debug(f"Schur 系統分解失敗，正則化加倍至 {reg:.1e}")

    def _direction(self, problem, factor, X, S, W, rp, Rd, rf, Rc):
        m = problem.num_constraints
        h = rp - problem.apply([_sym(r) for r in Rc]) + problem.apply([_sym(x @ r @ w) for x, r, w in zip(X, Rd, W)])
        rhs = np.concatenate([h, rf])
        sol = la.lu_solve(factor, rhs, check_finite=False)
        dy, dz = sol[:m], sol[m:]
        At_dy = problem.adjoint(dy)
        dS = [r - a for r, a in zip(Rd, At_dy)]
        dX = [rc - _sym(x @ ds @ w) for rc, x, ds, w in zip(Rc, X, dS, W)]
        return dX, dy, dz, dS

    def _step_lengths(self, X, S, dX, dS):
        alpha_p, alpha_d = np.inf, np.inf
        for x, dx, s, ds in zip(X, dX, S, dS):
            alpha_p = min(alpha_p, _max_step(x, dx))
            alpha_d = min(alpha_d, _max_step(s, ds))
        return alpha_p, alpha_d

    def _residuals(self, problem, C, X, S, y, z):
        rp = problem.rhs - problem.apply(X, z)
        At_y = problem.adjoint(y)
        Rd = [c - s - a for c, s, a in zip(C, S, At_y)]
        rf = problem.free_cost - problem.free_adjoint(y)
        return rp, Rd, rf

    def _solution(self, problem, status, X, S, y, z, residuals, iterations, history=None) -> SdpSolution:
        return SdpSolution(
            status=status, X=[x.copy() for x in X], S=[s.copy() for s in S], y=y.copy(), z=z.copy(),
            primal_objective=problem.objective(X, z), dual_objective=float(problem.rhs @ y),
            residuals=dict(residuals), iterations=iterations,
            block_names=list(problem.block_names), symbols=dict(problem.symbols), history=list(history or []),
        )

    def _dual_ray(self, problem, C, S, y, Rd, rf) -> Optional[float]:
        """bᵀy > 0 且 (𝒜*y + S, Fᵀy)/bᵀy → 0 時回傳正規化殘差"""
        by = float(problem.rhs @ y)
        if by <= 0:
            return None
        ray = np.sqrt(sum(np.sum((c - r) ** 2) for c, r in zip(C, Rd)))  # 𝒜*y + S = C − Rd
        ray = (ray + np.linalg.norm(problem.free_cost - rf)) / by
        return float(ray)

    # ---- 主程式 ----
    def solve(self, problem: SdpProblem, tol: Optional[float] = None,
              max_iter: Optional[int] = None) -> SdpSolution:
        """求解 SDP

        Args:
            problem: 標準錐形式的 SDP
            tol: 相對殘差與對偶間隙的終止門檻
            max_iter: 最大迭代次數

        Returns:
            SdpSolution: status 為 optimal/feasible/infeasible/max_iter

        Raises:
            NumericalFailure: 步長崩潰或正則化後仍無法分解
        """
        tol = self.tol if tol is None else tol
        max_iter = self.max_iter if max_iter is None else max_iter
        if problem.num_blocks == 0 and problem.num_constraints == 0:
            raise DimensionMismatch("SDP 至少要有一個區塊或一條等式約束")

        m, nf = problem.num_constraints, problem.num_free
        n_total = max(1, sum(problem.block_sizes))
        C = problem.objective_blocks()
        has_objective = bool(problem.obj_value.size) or bool(np.any(problem.free_cost))
        b_norm = float(np.linalg.norm(problem.rhs))
        c_norm = float(np.sqrt(sum(np.sum(c ** 2) for c in C)) + np.linalg.norm(problem.free_cost))
        structures = [_BlockStructure(problem, blk, self.chunk_size) for blk in range(problem.num_blocks)]
        F = problem.free_matrix.toarray() if nf else np.zeros((m, 0))

        X, S, y, z = self._initial_point(problem)
        self.logger.info(f"開始求解: 約束 {m} 條, 區塊 {problem.block_sizes}, 自由變數 {nf}")
        residuals: Dict[str, float] = {}
        history: List[dict] = []

        for iteration in range(1, max_iter + 1):
            rp, Rd, rf = self._residuals(problem, C, X, S, y, z)
            pobj, dobj = problem.objective(X, z), float(problem.rhs @ y)
            mu = sum(float(np.sum(x * s)) for x, s in zip(X, S)) / n_total
            residuals = {
                'primal': float(np.linalg.norm(rp)) / (1.0 + b_norm),
                'dual': float(np.sqrt(sum(np.sum(r ** 2) for r in Rd) + rf @ rf)) / (1.0 + c_norm),
                'gap': abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
                'mu': mu,
            }
            # pobj − dobj = ⟨X,S⟩ + ⟨Rd,X⟩ + rfᵀz − yᵀrp
            history.append({
                'iteration': iteration - 1,
                'pobj': pobj,
                'dobj': dobj,
                'complementarity': mu * n_total,
                'infeasibility': (sum(float(np.sum(r * x)) for r, x in zip(Rd, X)) + float(rf @ z)
                                  - float(y @ rp)),
                'primal': residuals['primal'],
                'dual': residuals['dual'],
            })
            if max(residuals['primal'], residuals['dual'], residuals['gap']) <= tol:
                status = OPTIMAL if has_objective else FEASIBLE
                self.logger.info(f"收斂: 第 {iteration - 1} 次迭代, 狀態 {status}, 目標 {pobj:.8e}")
                return self._solution(problem, status, X, S, y, z, residuals, iteration - 1, history)
            ray = self._dual_ray(problem, C, S, y, Rd, rf) if residuals['primal'] > tol else None
            if ray is not None and ray <= tol:
                self.logger.info(f"偵測到不可行: 對偶射線殘差 {ray:.3e}")
                residuals['ray'] = ray
                return self._solution(problem, INFEASIBLE, X, S, y, z, residuals, iteration - 1, history)

            try:
                W = [la.cho_solve(la.cho_factor(s, lower=True), np.eye(s.shape[0])) for s in S]
                W = [_sym(w) for w in W]
                K = np.zeros((m + nf, m + nf))
                self._schur(structures, X, W, K[:m, :m])
                if nf:
                    K[:m, m:] = F
                    K[m:, :m] = F.T
                scale = max(1.0, float(np.max(np.abs(np.diag(K[:m, :m])))) if m else 1.0)
                factor = self._factor(K, m, nf, scale)

                # 預測步
                Rc = [-x for x in X]
                dXp, dyp, dzp, dSp = self._direction(problem, factor, X, S, W, rp, Rd, rf, Rc)
                ap, ad = self._step_lengths(X, S, dXp, dSp)
                ap, ad = min(1.0, ap), min(1.0, ad)
                mu_aff = sum(float(np.sum((x + ap * dx) * (s + ad * ds)))
                             for x, dx, s, ds in zip(X, dXp, S, dSp)) / n_total
                sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0)) if mu > 0 else 0.0

                # 校正步
                Rc = [sigma * mu * w - x - _sym(dx @ ds @ w) for w, x, dx, ds in zip(W, X, dXp, dSp)]
                dX, dy, dz, dS = self._direction(problem, factor, X, S, W, rp, Rd, rf, Rc)
                ap, ad = self._step_lengths(X, S, dX, dS)
            except la.LinAlgError as e:
                raise NumericalFailure(f"第 {iteration} 次迭代數值失敗: {e}",
                                       self._solution(problem, NUMERICAL_FAILURE, X, S, y, z, residuals,
                                                      iteration, history)) from e

            ap = min(1.0, self.step_fraction * ap)
            ad = min(1.0, self.step_fraction * ad)
            self.logger.info(
                f"iter {iteration:3d}  pobj {pobj: .8e}  dobj {dobj: .8e}  "
                f"pinf {residuals['primal']:.2e}  dinf {residuals['dual']:.2e}  gap {residuals['gap']:.2e}  "
                f"ap {ap:.3f}  ad {ad:.3f}  sigma {sigma:.3f}")
            if min(ap, ad) < MIN_STEP:
                raise NumericalFailure(f"第 {iteration} 次迭代步長崩潰 (ap={ap:.2e}, ad={ad:.2e})",
                                       self._solution(problem, NUMERICAL_FAILURE, X, S, y, z, residuals, iteration,
                                                      history))

            X = [_sym(x + ap * dx) for x, dx in zip(X, dX)]
            z = z + ap * dz
            y = y + ad * dy
            S = [_sym(s + ad * ds) for s, ds in zip(S, dS)]

        self.logger.warning(f"達到最大迭代次數 {max_iter}")
        return self._solution(problem, MAX_ITER, X, S, y, z, residuals, max_iter, history)


def check_kkt(problem: SdpProblem, solution: SdpSolution) -> KktReport:
    """以稀疏展開矩陣重新計算原始、對偶可行性與互補間隙"""
    m = problem.num_constraints
    primal = np.zeros(m)
    dual_sq = 0.0
    min_x, min_s = np.inf, np.inf
    complementarity = 0.0
    C = problem.objective_blocks()
    for blk, size in enumerate(problem.block_sizes):
        mask = problem.con_block == blk
        k, i, j, v = problem.con_index[mask], problem.con_row[mask], problem.con_col[mask], problem.con_value[mask]
        off = i != j
        flat = sp.csr_matrix((np.concatenate([v, v[off]]),
                              (np.concatenate([k, k[off]]), np.concatenate([i * size + j, j[off] * size + i[off]]))),
                             shape=(m, size * size))
        X, S = solution.X[blk], solution.S[blk]
        primal += flat @ X.reshape(-1)
        At_y = (flat.T @ solution.y).reshape(size, size)
        dual_sq += float(np.sum((C[blk] - S - At_y) ** 2))
        min_x = min(min_x, float(np.linalg.eigvalsh(_sym(X))[0]))
        min_s = min(min_s, float(np.linalg.eigvalsh(_sym(S))[0]))
        complementarity += float(np.trace(X @ S))
    if problem.num_free:
        primal += problem.free_matrix @ solution.z
        free_dual = float(np.linalg.norm(problem.free_cost - problem.free_matrix.T @ solution.y))
    else:
        free_dual = 0.0
    b_norm = float(np.linalg.norm(problem.rhs))
    return KktReport(
        primal_residual=float(np.linalg.norm(primal - problem.rhs)) / (1.0 + b_norm),
        dual_residual=float(np.sqrt(dual_sq)),
        free_dual_residual=free_dual,
        gap=complementarity / (1.0 + abs(solution.primal_objective) + abs(solution.dual_objective)),
        min_primal_eig=0.0 if min_x == np.inf else min_x,
        min_dual_eig=0.0 if min_s == np.inf else min_s,
    )


_OBJECTIVE_PATTERNS = {
    'primal': re.compile(r'(?:objValPrimal\s*=|Primal objective value:)\s*([-+0-9.eE]+)'),
    'dual': re.compile(r'(?:objValDual\s*=|Dual objective value:)\s*([-+0-9.eE]+)'),
}


def find_external_solver() -> Optional[str]:
    for name in ('sdpa', 'csdp'):
        path = shutil.which(name)
        if path:
            return path
    return None


def solve_external(path: str, executable: Optional[str] = None, timeout: float = 3600.0) -> Dict[str, float]:
    """以外部 SDPA 格式求解器（sdpa 或 csdp）求解 .dat-s 檔

    回傳外部求解器以 SDPA 對偶形式回報的目標值；與內建求解器的
    原始目標值相差一個負號（見 sdpa_format）。
    """
    logger = logging.getLogger('SdpSolver')
    executable = executable or find_external_solver()
    if not executable:
        raise FileNotFoundError("找不到 sdpa 或 csdp 執行檔")
    out_path = f"{path}.out"
    logger.info(f"呼叫外部求解器: {executable} {path}")
    result = subprocess.run([executable, path, out_path], capture_output=True, text=True, timeout=timeout)
    text = result.stdout + '\n' + result.stderr
    values = {}
    for key, pattern in _OBJECTIVE_PATTERNS.items():
        match = pattern.search(text)
        if match:
            values[key] = float(match.group(1))
    if not values:
        raise NumericalFailure(f"無法從外部求解器輸出取得目標值 (returncode={result.returncode})")
    return values
