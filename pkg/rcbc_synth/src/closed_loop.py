"""
閉迴路 Monte-Carlo 模擬：以證書的控制器驅動未知系統，監看 B(x) 與是否進入不安全集
"""
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .certificate import Certificate
from .errors import ConfigError, DimensionMismatch
from .plant import BOUNDARY, UNIFORM_BALL, DisturbanceSpec, GroundTruthSystem, sample_disturbance, simulate_step
from .regions import Region
from .trust_region import TrustRegionSolver

logger = logging.getLogger('ClosedLoop')

X0_UNIFORM = 'uniform'
X0_VERTICES = 'vertices'
X0_FIXED = 'fixed'
X0_MODES = (X0_UNIFORM, X0_VERTICES, X0_FIXED)

ADVERSARIAL = 'adversarial'
W_MODES = (UNIFORM_BALL, BOUNDARY, ADVERSARIAL)

DECREASE_TOL = 1e-6


@dataclass
class SimulationRun:
    run_id: int
    states: np.ndarray          # n × (K+1)
    inputs: np.ndarray          # m × K
    disturbances: np.ndarray    # n × K
    barrier_values: np.ndarray  # K+1
    in_unsafe: np.ndarray       # K+1 布林
    closed_loop: bool = True

    @property
    def K(self) -> int:
        return self.states.shape[1] - 1

    @property
    def safe(self) -> bool:
        return not bool(np.any(self.in_unsafe))

    @property
    def entered_unsafe_at(self) -> Optional[int]:
        hits = np.nonzero(self.in_unsafe)[0]
        return int(hits[0]) if hits.size else None


@dataclass
class SimulationSummary:
    num_runs: int
    all_safe: bool
    unsafe_runs: List[int]
    max_barrier_ratio: float
    decrease_violations: int

    def to_json(self) -> dict:
        return {
            'num_runs': self.num_runs,
            'all_safe': self.all_safe,
            'unsafe_runs': self.unsafe_runs,
            'max_barrier_ratio': self.max_barrier_ratio,
            'decrease_violations': self.decrease_violations,
        }


def _clip_to_ball(w: np.ndarray, delta: float) -> np.ndarray:
    energy = float(w @ w)
    if energy > delta:
        w = w * (np.sqrt(delta / energy) * (1.0 - 1e-15)) if energy > 0 else w
    return w


def initial_states(initial: Region, mode: str, num_runs: int, rng: np.random.Generator,
                   x0: Optional[Sequence[float]] = None) -> np.ndarray:
    """產生 num_runs 個初始狀態 (num_runs, n)

    Args:
        initial: 初始集 X0
        mode: 'uniform' 在 X0 內均勻取樣；'vertices' 依序輪流使用各盒子頂點；'fixed' 全部使用 x0
        num_runs: 次數
        rng: 亂數產生器
        x0: fixed 模式的初始狀態
    """
    if mode == X0_UNIFORM:
        return initial.sample(rng, num_runs)
    if mode == X0_VERTICES:
        corners = np.vstack([box.vertices() for box in initial.boxes])
        return corners[np.arange(num_runs) % corners.shape[0]]
    if mode == X0_FIXED:
        if x0 is None:
            raise ConfigError("fixed 模式需要指定 x0")
        point = np.asarray(x0, dtype=float)
        if point.shape != (initial.dim,):
            raise DimensionMismatch(f"x0 維度 {point.shape} 與狀態維度 {initial.dim} 不符")
        return np.tile(point, (num_runs, 1))
    raise ConfigError(f"未知的初始狀態模式: {mode}，可用 {X0_MODES}")


def _simulate_one(sys: GroundTruthSystem, cert: Optional[Certificate], unsafe: Region, x0: np.ndarray, K: int,
                  w_mode: str, delta: float, seed: np.random.SeedSequence, run_id: int,
                  closed_loop: bool) -> SimulationRun:
    rng = np.random.default_rng(seed)
    n, m = sys.n, sys.m
    states = np.empty((n, K + 1))
    inputs = np.zeros((m, K))
    disturbances = np.zeros((n, K))
    states[:, 0] = x0
    dist = DisturbanceSpec(delta)
    solver = TrustRegionSolver(cert.P, cert.rho) if w_mode == ADVERSARIAL else None
    with np.errstate(over='ignore', invalid='ignore'):
        for k in range(K):
            x = states[:, k]
            if not np.all(np.isfinite(x)):
                states[:, k + 1:] = np.nan
                inputs[:, k:] = np.nan
                disturbances[:, k:] = np.nan
                break
            u = cert.control(x) if closed_loop else np.zeros(m)
            if solver is not None:
                x_hat = simulate_step(sys, x, u, np.zeros(n))
                w = _clip_to_ball(solver.solve(x_hat, delta).w, delta)
            else:
                w = sample_disturbance(dist, n, w_mode, rng)
            inputs[:, k] = u
            disturbances[:, k] = w
            states[:, k + 1] = simulate_step(sys, x, u, w)
        if cert is not None:
            barrier = np.einsum('ik,ij,jk->k', states, cert.P, states)
        else:
            barrier = np.full(K + 1, np.nan)
        finite = np.all(np.isfinite(states), axis=0)
        in_unsafe = np.zeros(K + 1, dtype=bool)
        if finite.any():
            in_unsafe[finite] = unsafe.contains(states[:, finite].T)
    return SimulationRun(run_id, states, inputs, disturbances, barrier, in_unsafe, closed_loop)


def _run_many(sys: GroundTruthSystem, cert: Optional[Certificate], initial: Region, unsafe: Region, delta: float,
              x0_mode: str, w_mode: str, K: int, num_runs: int, seed: int, x0, workers: int,
              closed_loop: bool) -> List[SimulationRun]:
    if w_mode not in W_MODES:
        raise ConfigError(f"未知的擾動模式: {w_mode}，可用 {W_MODES}")
    if w_mode == ADVERSARIAL and cert is None:
        raise ConfigError("adversarial 擾動需要證書的 P 與 ρ")
    if K < 0 or num_runs < 0:
        raise ConfigError(f"K 與 num_runs 不可為負: K={K}, num_runs={num_runs}")
    master = np.random.SeedSequence(seed)
    starts = initial_states(initial, x0_mode, num_runs, np.random.default_rng(master.spawn(1)[0]), x0)
    children = master.spawn(num_runs)
    jobs = [(sys, cert, unsafe, starts[i], K, w_mode, delta, children[i], i, closed_loop) for i in range(num_runs)]
    if workers and workers > 1 and num_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_simulate_one, *zip(*jobs)))
    else:
        runs = [_simulate_one(*job) for job in jobs]
    unsafe_count = sum(1 for run in runs if not run.safe)
    label = '閉迴路' if closed_loop else '開迴路'
    logger.info(f"{label}模擬完成: {num_runs} 次, K={K}, 擾動模式 {w_mode}, 進入不安全集 {unsafe_count} 次")
    return runs


def run_closed_loop(sys: GroundTruthSystem, cert: Certificate, x0_mode: str = X0_UNIFORM,
                    w_mode: str = UNIFORM_BALL, K: int = 200, num_runs: int = 50, seed: int = 0,
                    x0: Optional[Sequence[float]] = None, workers: int = 1) -> List[SimulationRun]:
    """以證書的控制器 u(x) 模擬未知系統

    Args:
        sys: 真實系統
        cert: 已通過 level gap 檢查的證書
        x0_mode: 'uniform' | 'vertices' | 'fixed'
        w_mode: 'uniform-ball' | 'boundary' | 'adversarial'（每步取信賴域最大化擾動）
        K: 時間長度
        num_runs: 次數
        seed: 主亂數種子，各次以 SeedSequence.spawn 衍生
        x0: fixed 模式的初始狀態
        workers: 平行處理的行程數

    Returns:
        List[SimulationRun]
    """
    if not cert.level_gap_ok():
        logger.warning("證書未通過 level gap 檢查，模擬結果不具保證")
    return _run_many(sys, cert, cert.initial, cert.unsafe, cert.delta, x0_mode, w_mode, K, num_runs, seed, x0,
                     workers, closed_loop=True)


def run_open_loop(sys: GroundTruthSystem, initial: Region, unsafe: Region, delta: float,
                  cert: Optional[Certificate] = None, x0_mode: str = X0_VERTICES, w_mode: str = UNIFORM_BALL,
                  K: int = 200, num_runs: int = 4, seed: int = 0, x0: Optional[Sequence[float]] = None,
                  workers: int = 1) -> List[SimulationRun]:
    """u ≡ 0 的對照模擬；給定證書時也記錄 B(x)"""
    return _run_many(sys, cert, initial, unsafe, delta, x0_mode, w_mode, K, num_runs, seed, x0, workers,
                     closed_loop=False)


def check_decrease_along_runs(runs: List[SimulationRun], cert: Certificate,
                              tol: float = DECREASE_TOL) -> List[dict]:
    """沿軌跡檢查 B(x(k+1)) ≤ λB(x(k)) + ρ‖w(k)‖² + tol（當 B(x(k)) < γ2）

    tol 為絕對誤差；relative_excess 另外記錄超出量除以 γ2。
    """
    failures = []
    for run in runs:
        if not run.closed_loop:
            continue
        B = run.barrier_values
        energy = np.sum(run.disturbances ** 2, axis=0)
        active = B[:-1] < cert.gamma2
        excess = B[1:] - cert.lam * B[:-1] - cert.rho * energy
        for k in np.nonzero(active & (excess > tol))[0]:
            failures.append({'run_id': run.run_id, 'step': int(k), 'excess': float(excess[k]),
                             'relative_excess': float(excess[k]) / cert.gamma2})
    return failures


def summarize_runs(runs: List[SimulationRun], cert: Certificate) -> SimulationSummary:
    ratios = [float(np.nanmax(run.barrier_values)) / cert.gamma2 for run in runs if run.barrier_values.size]
    return SimulationSummary(
        num_runs=len(runs),
        all_safe=all(run.safe for run in runs),
        unsafe_runs=[run.run_id for run in runs if not run.safe],
        max_barrier_ratio=max(ratios) if ratios else 0.0,
        decrease_violations=len(check_decrease_along_runs(runs, cert)),
    )


def _fmt(value: float) -> str:
    return '%.17g' % value


def export_runs(runs: List[SimulationRun], path: str):
    """寫出 CSV：每列一個 (run, step)，最後一步沒有 u 與 w"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    n = runs[0].states.shape[0] if runs else 0
    m = runs[0].inputs.shape[0] if runs else 0
    header = (['run_id', 'step'] + [f'x_{i + 1}' for i in range(n)] + [f'u_{j + 1}' for j in range(m)]
              + [f'w_{i + 1}' for i in range(n)] + ['barrier', 'in_unsafe'])
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for run in runs:
            for k in range(run.K + 1):
                row = [run.run_id, k] + [_fmt(v) for v in run.states[:, k]]
                if k < run.K:
                    row += [_fmt(v) for v in run.inputs[:, k]] + [_fmt(v) for v in run.disturbances[:, k]]
                else:
                    row += [''] * (m + n)
                row += [_fmt(run.barrier_values[k]), int(run.in_unsafe[k])]
                writer.writerow(row)
    logger.info(f"已匯出 {len(runs)} 條軌跡至 {path}")


def read_runs(path: str) -> List[SimulationRun]:
    """讀回 export_runs 的 CSV"""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    n = sum(1 for h in header if h.startswith('x_'))
    m = sum(1 for h in header if h.startswith('u_'))
    grouped = {}
    for row in rows:
        grouped.setdefault(int(row[0]), []).append(row)

    def parse(cells: List[str]) -> np.ndarray:
        return np.array([float(c) for c in cells], dtype=float)

    runs = []
    for run_id, run_rows in grouped.items():
        run_rows.sort(key=lambda r: int(r[1]))
        K = len(run_rows) - 1
        states = np.column_stack([parse(r[2:2 + n]) for r in run_rows])
        inputs = np.column_stack([parse(r[2 + n:2 + n + m]) for r in run_rows[:K]]) if K else np.zeros((m, 0))
        disturbances = (np.column_stack([parse(r[2 + n + m:2 + 2 * n + m]) for r in run_rows[:K]]) if K
                        else np.zeros((n, 0)))
        barrier = np.array([float(r[2 + 2 * n + m]) for r in run_rows])
        in_unsafe = np.array([r[3 + 2 * n + m] == '1' for r in run_rows])
        runs.append(SimulationRun(run_id, states, inputs, disturbances, barrier, in_unsafe))
    return runs


