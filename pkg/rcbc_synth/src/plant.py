"""
真實系統（僅供資料產生與測試時驗證）與輸入-狀態資料收集

合成流程只會讀取 TrajectoryData；GroundTruthSystem 的 A、B 只在
simulate_step / simulate_batch 與測試用的 true_data_matrices 中使用。
"""
import json
import logging
import os
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, DimensionMismatch, RankError, RankRetryExhausted
from .polynomial import Dictionary, Monomial, PolyMatrix, Polynomial, polyvector

logger = logging.getLogger('Plant')

RANK_TOL = 1e-8
MAX_RANK_RETRIES = 20

UNIFORM_BALL = 'uniform-ball'
BOUNDARY = 'boundary'

SeedLike = Union[int, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GroundTruthSystem:
    """x⁺ = A·R(x) + B·G(x)·u + w"""
    A: np.ndarray
    B: np.ndarray
    r_dictionary: Dictionary
    g_matrix: PolyMatrix
    name: str = 'custom'
    tau: Optional[float] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)
        n = self.r_dictionary.nvars
        if A.shape != (n, len(self.r_dictionary)):
            raise DimensionMismatch(f"A 的大小 {A.shape} 應為 {(n, len(self.r_dictionary))}")
        if B.shape != (n, self.g_matrix.rows):
            raise DimensionMismatch(f"B 的大小 {B.shape} 應為 {(n, self.g_matrix.rows)}")
        if self.g_matrix.nvars != n:
            raise DimensionMismatch("G(x) 的變數個數與狀態維度不符")

    @property
    def n(self) -> int:
        return self.r_dictionary.nvars

    @property
    def m(self) -> int:
        return self.g_matrix.cols

    # ---- 案例系統 ----
    @classmethod
    def academic(cls, tau: float = 0.002) -> 'GroundTruthSystem':
        """二維學術範例：
        x1⁺ = x1 + τ(−x1 + x1x2 + x2u)
        x2⁺ = x2 + τ(x1 + 2x2 + x1² + x1²x2 + u)
        """
        r_dict = Dictionary([Monomial((1, 0)), Monomial((0, 1)), Monomial((1, 1)),
                             Monomial((2, 0)), Monomial((2, 1))], Dictionary.R, 2)
        A = np.array([
            [1 - tau, 0.0, tau, 0.0, 0.0],
            [tau, 1 + 2 * tau, 0.0, tau, tau],
        ])
        B = np.diag([tau, tau])
        g_matrix = polyvector([Polynomial.variable(2, 1), Polynomial.constant(2, 1.0)])
        return cls(A, B, r_dict, g_matrix, 'academic', tau)

    @classmethod
    def lorenz(cls, tau: float = 0.009) -> 'GroundTruthSystem':
        """離散化的 Lorenz 系統，輸入作用在 x2"""
        r_dict = Dictionary([Monomial((1, 0, 0)), Monomial((0, 1, 0)), Monomial((0, 0, 1)),
                             Monomial((1, 0, 1)), Monomial((1, 1, 0))], Dictionary.R, 3)
        A = np.array([
            [1 - 10 * tau, 10 * tau, 0.0, 0.0, 0.0],
            [28 * tau, 1 - tau, 0.0, -tau, 0.0],
            [0.0, 0.0, 1 - 8.0 / 3.0 * tau, 0.0, tau],
        ])
        B = np.array([[0.0], [tau], [0.0]])
        g_matrix = PolyMatrix.from_numeric([[1.0]], 3)
        return cls(A, B, r_dict, g_matrix, 'lorenz', tau)

    @classmethod
    def from_config(cls, config: dict) -> 'GroundTruthSystem':
        """{"preset": "academic", "tau": 0.002} 或 {"A": ..., "B": ..., "r_dictionary": ..., "g_matrix": ...}"""
        preset = config.get('preset')
        if preset == 'academic':
            return cls.academic(config.get('tau', 0.002))
        if preset == 'lorenz':
            return cls.lorenz(config.get('tau', 0.009))
        if preset is not None:
            raise ConfigError(f"未知的系統預設: {preset}")
        try:
            r_dict = Dictionary.from_json(config['r_dictionary'], Dictionary.R)
            g_matrix = PolyMatrix.from_json(r_dict.nvars, config['g_matrix'])
            return cls(np.array(config['A'], dtype=float), np.array(config['B'], dtype=float),
                       r_dict, g_matrix, config.get('name', 'custom'), config.get('tau'))
        except KeyError as e:
            raise ConfigError(f"系統設定缺少欄位: {e}") from e

    def to_json(self) -> dict:
        if self.name in ('academic', 'lorenz'):
            return {'preset': self.name, 'tau': self.tau}
        return {
            'name': self.name,
            'A': self.A.tolist(),
            'B': self.B.tolist(),
            'r_dictionary': self.r_dictionary.to_json(),
            'g_matrix': self.g_matrix.to_json(),
        }


@dataclass(frozen=True)
class DisturbanceSpec:
    """W(δ) = {w | wᵀw ≤ δ}"""
    delta: float

    def __post_init__(self):
        if not self.delta >= 0:
            raise ConfigError(f"擾動界 delta 必須 ≥ 0: {self.delta}")


@dataclass(frozen=True)
class ExcitationSpec:
    """每個輸入獨立、各時間點獨立的均勻分布 U[low_i, high_i]"""
    low: Tuple[float, ...]
    high: Tuple[float, ...]
    kind: str = 'uniform'

    def __post_init__(self):
        if len(self.low) != len(self.high):
            raise ConfigError("激勵訊號上下界長度不符")
        if any(a > b for a, b in zip(self.low, self.high)):
            raise ConfigError(f"激勵訊號下界大於上界: {self.low} > {self.high}")
        if self.kind != 'uniform':
            raise ConfigError(f"不支援的激勵訊號類型: {self.kind}")

    @classmethod
    def symmetric(cls, amplitude: float, m: int) -> 'ExcitationSpec':
        return cls(tuple([-amplitude] * m), tuple([amplitude] * m))

    @property
    def m(self) -> int:
        return len(self.low)

    def sample(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """回傳 m×steps 的輸入矩陣"""
        return rng.uniform(self.low, self.high, size=(steps, self.m)).T

    def to_json(self) -> dict:
        return {'kind': self.kind, 'low': list(self.low), 'high': list(self.high)}

    @classmethod
    def from_json(cls, data: dict) -> 'ExcitationSpec':
        return cls(tuple(float(v) for v in data['low']), tuple(float(v) for v in data['high']),
                   data.get('kind', 'uniform'))


def _generalized_input(g_dictionary: Dictionary, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """𝒢(x)u = (I_m ⊗ g(x)) u = u ⊗ g(x)"""
    return np.kron(u, g_dictionary.evaluate(x))


@dataclass
class TrajectoryData:
    """單一連續軌跡的資料矩陣（行 k 對應時間 k）"""
    U: np.ndarray
    X0T: np.ndarray
    X1T: np.ndarray
    R0T: np.ndarray
    G0T: np.ndarray
    r_dictionary: Dictionary
    g_dictionary: Dictionary
    delta: float
    W_hidden: Optional[np.ndarray] = None
    seed: Optional[int] = None
    excitation: Optional[ExcitationSpec] = None
    attempts: int = 1

    @property
    def n(self) -> int:
        return self.X0T.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def T(self) -> int:
        return self.X0T.shape[1]

    @property
    def N(self) -> int:
        return self.R0T.shape[0]

    @property
    def N_hat(self) -> int:
        return self.G0T.shape[0]

    def save(self, directory: str, test_artifacts: bool = False):
        """寫出 CSV（每個矩陣一個檔案，17 位有效數字）與 trajectory.json"""
        os.makedirs(directory, exist_ok=True)
        matrices = {'U': self.U, 'X0T': self.X0T, 'X1T': self.X1T, 'R0T': self.R0T, 'G0T': self.G0T}
        if test_artifacts and self.W_hidden is not None:
            matrices['W_hidden'] = self.W_hidden
        for name, matrix in matrices.items():
            np.savetxt(os.path.join(directory, f'{name}.csv'), np.atleast_2d(matrix), delimiter=',', fmt='%.17g')
        meta = {
            'n': self.n,
            'm': self.m,
            'T': self.T,
            'delta': self.delta,
            'seed': self.seed,
            'attempts': self.attempts,
            'excitation': self.excitation.to_json() if self.excitation else None,
            'r_dictionary': self.r_dictionary.to_json(),
            'g_dictionary': self.g_dictionary.to_json(),
        }
        with open(os.path.join(directory, 'trajectory.json'), 'w', encoding='utf-8') as f:
            json.dump(meta, f, indent=2)
        logger.info(f"軌跡資料已寫入 {directory}")

    @classmethod
    def load(cls, directory: str) -> 'TrajectoryData':
        meta_path = os.path.join(directory, 'trajectory.json')
        if not os.path.exists(meta_path):
            raise ConfigError(f"找不到軌跡資料: {meta_path}")
        with open(meta_path, 'r', encoding='utf-8') as f:
            meta = json.load(f)
        n, m, T = meta['n'], meta['m'], meta['T']
        r_dict = Dictionary.from_json(meta['r_dictionary'], Dictionary.R, n)
        g_dict = Dictionary.from_json(meta['g_dictionary'], Dictionary.G, n)

        def read(name: str, rows: int) -> np.ndarray:
            return np.loadtxt(os.path.join(directory, f'{name}.csv'), delimiter=',', ndmin=2).reshape(rows, T)

        w_path = os.path.join(directory, 'W_hidden.csv')
        excitation = meta.get('excitation')
        return cls(
            U=read('U', m),
            X0T=read('X0T', n),
            X1T=read('X1T', n),
            R0T=read('R0T', len(r_dict)),
            G0T=read('G0T', m * len(g_dict)),
            r_dictionary=r_dict,
            g_dictionary=g_dict,
            delta=meta['delta'],
            W_hidden=read('W_hidden', n) if os.path.exists(w_path) else None,
            seed=meta.get('seed'),
            excitation=ExcitationSpec.from_json(excitation) if excitation else None,
            attempts=meta.get('attempts', 1),
        )


@dataclass
class RankReport:
    full_row_rank: bool
    singular_values: np.ndarray
    ratio: float
    reason: str = ''


def simulate_step(sys: GroundTruthSystem, x, u, w) -> np.ndarray:
    """單步演化 x⁺ = A·R(x) + B·G(x)·u + w"""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = np.asarray(w, dtype=float)
    if x.shape != (sys.n,) or u.shape != (sys.m,) or w.shape != (sys.n,):
        raise DimensionMismatch(f"維度不符: x{x.shape}, u{u.shape}, w{w.shape}，應為 n={sys.n}, m={sys.m}")
    return sys.A @ sys.r_dictionary.evaluate(x) + sys.B @ (sys.g_matrix.evaluate(x) @ u) + w


def simulate_batch(sys: GroundTruthSystem, states: np.ndarray, inputs: np.ndarray,
                   disturbances: np.ndarray) -> np.ndarray:
    """向量化單步演化；states (k,n)、inputs (k,m)、disturbances (k,n)"""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    inputs = np.asarray(inputs, dtype=float).reshape(states.shape[0], sys.m)
    disturbances = np.atleast_2d(np.asarray(disturbances, dtype=float))
    if states.shape[1] != sys.n or disturbances.shape != states.shape:
        raise DimensionMismatch("批次維度不符")
    drift = (sys.A @ sys.r_dictionary.evaluate_columns(states.T)).T
    gains = np.empty((states.shape[0], sys.g_matrix.rows, sys.m))
    for i in range(sys.g_matrix.rows):
        for j in range(sys.m):
            gains[:, i, j] = sys.g_matrix[i, j].evaluate(states)
    actuation = np.einsum('kij,kj->ki', gains, inputs) @ sys.B.T
    return drift + actuation + disturbances


def sample_disturbance(dist: DisturbanceSpec, n: int, mode: str = UNIFORM_BALL, seed: SeedLike = None) -> np.ndarray:
    """在 W(δ) 中取樣擾動

    Args:
        dist: 擾動界
        n: 狀態維度
        mode: 'uniform-ball' 在球內均勻取樣；'boundary' 落在球面 wᵀw = δ
        seed: 亂數種子或 Generator

    Returns:
        np.ndarray: 長度 n 的擾動向量
    """
    if dist.delta == 0:
        return np.zeros(n)
    rng = _rng(seed)
    direction = rng.standard_normal(n)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.standard_normal(n)
        norm = np.linalg.norm(direction)
    direction /= norm
    radius = np.sqrt(dist.delta)
    if mode == UNIFORM_BALL:
        radius *= rng.uniform() ** (1.0 / n)
    elif mode != BOUNDARY:
        raise ValueError(f"未知的擾動取樣模式: {mode}")
    w = radius * direction
    # 捨入誤差不可讓 wᵀw 超過 δ
    energy = float(w @ w)
    if energy > dist.delta:
        w *= np.sqrt(dist.delta / energy) * (1.0 - 1e-15)
    return w


def check_rank(R0T: np.ndarray, tol: float = RANK_TOL) -> RankReport:
    """R0T 是否為列滿秩：T > N 且 σ_N/σ_1 > tol"""
    R0T = np.atleast_2d(np.asarray(R0T, dtype=float))
    N, T = R0T.shape
    singular_values = np.linalg.svd(R0T, compute_uv=False)
    if T <= N:
        return RankReport(False, singular_values, 0.0, f"樣本數 T={T} 必須大於字典大小 N={N}")
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return RankReport(False, singular_values, 0.0, "資料矩陣為零")
    ratio = float(singular_values[N - 1] / singular_values[0])
    if ratio <= tol:
        return RankReport(False, singular_values, ratio, f"σ_N/σ_1 = {ratio:.3e} ≤ {tol:.1e}")
    return RankReport(True, singular_values, ratio)


def collect_trajectory(sys: GroundTruthSystem, x0, excitation: ExcitationSpec, dist: DisturbanceSpec, T: int,
                       seed: Optional[int], r_dictionary: Dictionary, g_dictionary: Dictionary) -> TrajectoryData:
    """收集長度 T 的單一連續軌跡，並以合成用字典建立 R0T、G0T"""
    if T < 1:
        raise ConfigError(f"T 必須 ≥ 1: {T}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise DimensionMismatch(f"初始狀態維度 {x0.shape} 應為 ({sys.n},)")
    if excitation.m != sys.m:
        raise DimensionMismatch(f"激勵訊號輸入數 {excitation.m} 與系統輸入數 {sys.m} 不符")
    if r_dictionary.nvars != sys.n or g_dictionary.nvars != sys.n:
        raise DimensionMismatch("合成字典的變數個數與系統狀態維度不符")

    rng = _rng(seed)
    U = excitation.sample(rng, T)
    X0T = np.empty((sys.n, T))
    X1T = np.empty((sys.n, T))
    W = np.empty((sys.n, T))
    x = x0
    for k in range(T):
        w = sample_disturbance(dist, sys.n, UNIFORM_BALL, rng)
        X0T[:, k] = x
        W[:, k] = w
        x = simulate_step(sys, x, U[:, k], w)
        X1T[:, k] = x

    R0T = r_dictionary.evaluate_columns(X0T)
    G0T = np.column_stack([_generalized_input(g_dictionary, X0T[:, k], U[:, k]) for k in range(T)])
    return TrajectoryData(U=U, X0T=X0T, X1T=X1T, R0T=R0T, G0T=G0T, r_dictionary=r_dictionary,
                          g_dictionary=g_dictionary, delta=dist.delta, W_hidden=W, seed=seed, excitation=excitation)


def true_data_matrices(sys: GroundTruthSystem, data: TrajectoryData) -> Tuple[np.ndarray, np.ndarray]:
    """以真實字典計算 (R0T_true, G0T_true)，僅供測試時檢查資料一致性"""
    R_true = sys.r_dictionary.evaluate_columns(data.X0T)
    G_true = np.column_stack([sys.g_matrix.evaluate(data.X0T[:, k]) @ data.U[:, k] for k in range(data.T)])
    return R_true, G_true


class TrajectoryCollector:
    """收集資料並在秩條件不成立時換種子重新收集"""

    def __init__(self, sys: GroundTruthSystem, r_dictionary: Dictionary, g_dictionary: Dictionary,
                 max_retries: int = MAX_RANK_RETRIES, rank_tol: float = RANK_TOL):
        self.sys = sys
        self.r_dictionary = r_dictionary
        self.g_dictionary = g_dictionary
        self.max_retries = max_retries
        self.rank_tol = rank_tol
        self.logger = logging.getLogger('TrajectoryCollector')

    def collect_with_retries(self, x0, excitation: ExcitationSpec, dist: DisturbanceSpec, T: int,
                             seed: int) -> TrajectoryData:
        """第 k 次嘗試使用種子 seed + k

        Raises:
            RankError: T ≤ N，重新取樣也無法滿足
            RankRetryExhausted: 重試次數用盡
        """
        N = len(self.r_dictionary)
        if T <= N:
            raise RankError(f"樣本數 T={T} 必須大於字典大小 N={N}")
        last_report = None
        for attempt in range(self.max_retries):
            data = collect_trajectory(self.sys, x0, excitation, dist, T, seed + attempt,
                                      self.r_dictionary, self.g_dictionary)
            report = check_rank(data.R0T, self.rank_tol)
            if report.full_row_rank:
                data.attempts = attempt + 1
                self.logger.info(f"資料收集完成: T={T}, 種子={seed + attempt}, σ_N/σ_1={report.ratio:.3e}")
                return data
            last_report = report
            self.logger.warning(f"第 {attempt + 1} 次收集未達列滿秩 ({report.reason})，換種子重試")
        raise RankRetryExhausted(
            f"{self.max_retries} 次收集都未達列滿秩，最後一次: {last_report.reason if last_report else ''}")
