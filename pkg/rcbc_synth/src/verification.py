"""
以真實系統逐點驗證證書的三個條件（僅限測試與 verify 子命令）

(a) X0 上 B(x) ≤ γ1
(b) X1 上 B(x) ≥ γ2
(c) {x ∈ X | B(x) < γ2} 上 max_{‖w‖² ≤ δ} B(x̂ + w) − ρ‖w‖² ≤ λB(x)，x̂ 為標稱下一步
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .certificate import Certificate
from .plant import GroundTruthSystem, simulate_batch
from .trust_region import TrustRegionSolver

INITIAL_CONDITION = 'initial'
UNSAFE_CONDITION = 'unsafe'
DECREASE_CONDITION = 'decrease'

# 報告中最多列出的違規數
MAX_LISTED_VIOLATIONS = 200


@dataclass
class Violation:
    condition: str
    x: List[float]
    value: float
    bound: float


@dataclass
class ConditionSummary:
    samples: int = 0
    violations: int = 0
    worst_margin: float = -np.inf
    # 僅供診斷：最差超出量除以 γ2
    worst_relative_excess: Optional[float] = None


@dataclass
class VerificationReport:
    initial: ConditionSummary = field(default_factory=ConditionSummary)
    unsafe: ConditionSummary = field(default_factory=ConditionSummary)
    decrease: ConditionSummary = field(default_factory=ConditionSummary)
    violations: List[Violation] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return not (self.initial.violations or self.unsafe.violations or self.decrease.violations)

    @property
    def total_violations(self) -> int:
        return self.initial.violations + self.unsafe.violations + self.decrease.violations

    def to_json(self) -> dict:
        data = {
            'passed': self.passed,
            'seed': self.seed,
            'conditions': {
                INITIAL_CONDITION: asdict(self.initial),
                UNSAFE_CONDITION: asdict(self.unsafe),
                DECREASE_CONDITION: asdict(self.decrease),
            },
            'violations': [asdict(v) for v in self.violations],
        }
        for summary in data['conditions'].values():
            if not np.isfinite(summary['worst_margin']):
                summary['worst_margin'] = None
        return data

    def to_text(self) -> str:
        lines = [f"驗證結果: {'通過' if self.passed else '失敗'}"]
        for name, summary in ((INITIAL_CONDITION, self.initial), (UNSAFE_CONDITION, self.unsafe),
                              (DECREASE_CONDITION, self.decrease)):
            lines.append(f"  ({name}) 樣本 {summary.samples}, 違規 {summary.violations}, "
                         f"最差裕度 {summary.worst_margin:.3e}")
        for v in self.violations[:20]:
            point = ', '.join(f'{c:.6g}' for c in v.x)
            lines.append(f"  違規 [{v.condition}] x=({point}) 值 {v.value:.6e} 界 {v.bound:.6e}")
        if len(self.violations) > 20:
            lines.append(f"  ... 另有 {len(self.violations) - 20} 筆")
        return '\n'.join(lines)

    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, 'verification.json'), 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2)
        with open(os.path.join(directory, 'verification.txt'), 'w', encoding='utf-8') as f:
            f.write(self.to_text() + '\n')


class PointwiseVerifier:
    """對證書做格點加隨機取樣的逐點檢查"""

    def __init__(self, samples: int = 10000, grid_per_axis: int = 21, violation_tol: float = 1e-6,
                 level_rel_tol: float = 1e-6, seed: Optional[int] = 0):
        self.samples = samples
        self.grid_per_axis = grid_per_axis
        self.violation_tol = violation_tol
        self.level_rel_tol = level_rel_tol
        self.seed = seed
        self.logger = logging.getLogger('PointwiseVerifier')

    @classmethod
    def from_settings(cls, settings: dict, seed: Optional[int] = 0) -> 'PointwiseVerifier':
        section = (settings or {}).get('verification', {})
        return cls(
            samples=section.get('samples', 10000),
            grid_per_axis=section.get('grid_per_axis', 21),
            violation_tol=section.get('violation_tol', 1e-6),
            level_rel_tol=section.get('level_rel_tol', 1e-6),
            seed=seed,
        )

    def _region_points(self, region, rng: np.random.Generator) -> np.ndarray:
        grids = [box.grid(self.grid_per_axis) for box in region.boxes]
        return np.vstack(grids + [region.sample(rng, self.samples)])

    def _sublevel_points(self, cert: Certificate, rng: np.random.Generator) -> np.ndarray:
        """{B < γ2} ∩ X 內的點：橢球內均勻取樣加上 X 的格點"""
        n = cert.n
        L = np.linalg.cholesky(cert.P)
        direction = rng.standard_normal((self.samples, n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.uniform(size=(self.samples, 1)) ** (1.0 / n)
        unit_ball = direction * radius
        # xᵀPx = γ2‖u‖²，其中 x = √γ2 · L⁻ᵀ u
        ellipsoid = np.sqrt(cert.gamma2) * np.linalg.solve(L.T, unit_ball.T).T
        points = np.vstack([ellipsoid, cert.state.boxes[0].grid(self.grid_per_axis)])
        keep = cert.state.contains(points) & (cert.barrier(points) < cert.gamma2)
        return points[keep]

    def _record(self, report: VerificationReport, summary: ConditionSummary, condition: str, points: np.ndarray,
                values: np.ndarray, bounds: np.ndarray, margins: np.ndarray):
        summary.samples += int(points.shape[0])
        if points.shape[0]:
            summary.worst_margin = max(summary.worst_margin, float(np.max(margins)))
        bad = np.nonzero(margins > 0)[0]
        summary.violations += int(bad.size)
        for idx in bad:
            if len(report.violations) >= MAX_LISTED_VIOLATIONS:
                break
            report.violations.append(Violation(condition, points[idx].tolist(), float(values[idx]),
                                               float(bounds[idx])))

    def verify(self, cert: Certificate, sys: GroundTruthSystem) -> VerificationReport:
        """逐點驗證

        Args:
            cert: 證書
            sys: 真實系統（只在此處使用）

        Returns:
            VerificationReport: 違規以資料回報，不拋出例外
        """
        rng = np.random.default_rng(self.seed)
        report = VerificationReport(seed=self.seed)

        # (a) 初始集
        points = self._region_points(cert.initial, rng)
        values = cert.barrier(points)
        bounds = np.full(points.shape[0], cert.gamma1 * (1.0 + self.level_rel_tol))
        self._record(report, report.initial, INITIAL_CONDITION, points, values, bounds,
                     (values - bounds) / cert.gamma1)

        # (b) 不安全集
        points = self._region_points(cert.unsafe, rng)
        values = cert.barrier(points)
        bounds = np.full(points.shape[0], cert.gamma2 * (1.0 - self.level_rel_tol))
        self._record(report, report.unsafe, UNSAFE_CONDITION, points, values, bounds,
                     (bounds - values) / cert.gamma2)

        # (c) 遞減條件，絕對容許誤差
        points = self._sublevel_points(cert, rng)
        if points.shape[0]:
            inputs = np.array([cert.control(x) for x in points]).reshape(points.shape[0], sys.m)
            nominal = simulate_batch(sys, points, inputs, np.zeros_like(points))
            solver = TrustRegionSolver(cert.P, cert.rho)
            worst = np.array([solver.solve(x_hat, cert.delta).value for x_hat in nominal])
            bounds = cert.lam * cert.barrier(points)
            margins = worst - bounds - self.violation_tol
            self._record(report, report.decrease, DECREASE_CONDITION, points, worst, bounds, margins)
            report.decrease.worst_relative_excess = float(np.max(worst - bounds)) / cert.gamma2

        level = logging.INFO if report.passed else logging.WARNING
        self.logger.log(level, f"驗證完成: (a) {report.initial.samples} 點, (b) {report.unsafe.samples} 點, "
                               f"(c) {report.decrease.samples} 點, 違規 {report.total_violations}")
        return report


def verify_pointwise(cert: Certificate, sys: GroundTruthSystem, samples: int = 10000, grid_per_axis: int = 21,
                     violation_tol: float = 1e-6, level_rel_tol: float = 1e-6,
                     seed: Optional[int] = 0) -> VerificationReport:
    return PointwiseVerifier(samples, grid_per_axis, violation_tol, level_rel_tol, seed).verify(cert, sys)
