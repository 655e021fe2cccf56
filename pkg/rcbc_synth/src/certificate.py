"""
由 SDP 解組出障礙證書：P = Z⁻¹、H(x)、ρ、c、γ1、γ2 與展開後的控制器
"""
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as la

from .errors import EmptyRegion, LevelGapFailure, NotPositiveDefinite
from .polynomial import PolyMatrix, Polynomial, polyvector
from .regions import INITIAL, STATE, UNSAFE, Box, Region
from .sos_compiler import SosProgram, build_level_set_program

logger = logging.getLogger('Certificate')

KKT_FEAS_TOL = 1e-12


@dataclass
class Certificate:
    P: np.ndarray
    lam: float
    pi: float
    rho: float
    c: float
    gamma1: float
    gamma2: float
    delta: float
    state: Region
    initial: Region
    unsafe: Region
    H: Optional[PolyMatrix] = None
    controller: Optional[PolyMatrix] = None
    provenance: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def barrier(self, x) -> np.ndarray:
        """B(x) = xᵀPx；單點回傳 float，批次 (k, n) 回傳陣列"""
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 1:
            return float(arr @ self.P @ arr)
        return np.einsum('ki,ij,kj->k', arr, self.P, arr)

    def control(self, x) -> np.ndarray:
        if self.controller is None:
            return np.zeros(0)
        return self.controller.evaluate(np.asarray(x, dtype=float)).reshape(-1)

    @property
    def m(self) -> int:
        return self.controller.rows if self.controller is not None else 0

    def level_gap_ok(self) -> bool:
        return check_level_gap(self.gamma1, self.gamma2, self.lam, self.c)

    # ---- JSON ----
    def to_json(self) -> dict:
        return {
            'P': self.P.tolist(),
            'lambda': self.lam,
            'pi': self.pi,
            'rho': self.rho,
            'c': self.c,
            'gamma1': self.gamma1,
            'gamma2': self.gamma2,
            'delta': self.delta,
            'regions': {
                STATE: self.state.to_json(),
                INITIAL: self.initial.to_json(),
                UNSAFE: self.unsafe.to_json(),
            },
            'H': self.H.to_json() if self.H is not None else None,
            'controller': self.controller.to_json() if self.controller is not None else None,
            'provenance': self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict) -> 'Certificate':
        P = np.array(data['P'], dtype=float)
        n = P.shape[0]
        regions = data['regions']
        return cls(
            P=P, lam=data['lambda'], pi=data['pi'], rho=data['rho'], c=data['c'],
            gamma1=data['gamma1'], gamma2=data['gamma2'], delta=data['delta'],
            state=Region.from_json(regions[STATE], STATE, 'X'),
            initial=Region.from_json(regions[INITIAL], INITIAL, 'X0'),
            unsafe=Region.from_json(regions[UNSAFE], UNSAFE, 'X1'),
            H=PolyMatrix.from_json(n, data['H']) if data.get('H') else None,
            controller=PolyMatrix.from_json(n, data['controller']) if data.get('controller') else None,
            provenance=data.get('provenance', {}),
        )

    def save(self, path: str):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2)
        logger.info(f"證書已寫入 {path}")

    @classmethod
    def load(cls, path: str) -> 'Certificate':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_json(json.load(f))


def compute_rho_c(P: np.ndarray, pi: float, delta: float) -> Tuple[float, float]:
    """ρ = (1 + 1/π)·λ_max(P)，c = ρ·δ"""
    lam_max = float(np.linalg.eigvalsh(np.asarray(P, dtype=float))[-1])
    rho = (1.0 + 1.0 / pi) * lam_max
    return rho, rho * delta


def check_level_gap(gamma1: float, gamma2: float, lam: float, c: float) -> bool:
    """γ2 > γ1 且 c ≤ γ2(1 − λ)"""
    return gamma2 > gamma1 and c <= gamma2 * (1.0 - lam)


def box_max_quadratic(P: np.ndarray, box: Box) -> Tuple[float, np.ndarray]:
    """凸二次函數在盒子上的最大值必在頂點"""
    vertices = box.vertices()
    values = np.einsum('ki,ij,kj->k', vertices, P, vertices)
    best = int(np.argmax(values))
    return float(values[best]), vertices[best]


def box_min_quadratic(P: np.ndarray, box: Box) -> Tuple[float, np.ndarray]:
    """KKT 列舉：每個座標固定在下界、上界或自由（3ⁿ 種），自由座標解 P_ff x_f = −P_fc x_c"""
    n = P.shape[0]
    lower, upper = box.lower_array, box.upper_array
    best_value, best_point = np.inf, None
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pattern = np.array(pattern)
        x = np.where(pattern < 0, lower, np.where(pattern > 0, upper, 0.0))
        free = pattern == 0
        if free.any():
            clamped = ~free
            rhs = -P[np.ix_(free, clamped)] @ x[clamped] if clamped.any() else np.zeros(int(free.sum()))
            x[free] = np.linalg.solve(P[np.ix_(free, free)], rhs)
            span = upper - lower
            if np.any(x[free] < lower[free] - KKT_FEAS_TOL * span[free]) or \
                    np.any(x[free] > upper[free] + KKT_FEAS_TOL * span[free]):
                continue
            x = np.clip(x, lower, upper)
        value = float(x @ P @ x)
        if value < best_value:
            best_value, best_point = value, x
    return best_value, best_point


def level_sets(P: np.ndarray, initial: Region, unsafe: Region) -> Tuple[float, float]:
    """γ1 = max_{X0} xᵀPx（頂點列舉），γ2 = min_{X1} xᵀPx（各盒子 KKT 列舉後取最小）"""
    if not initial.boxes or not unsafe.boxes:
        raise EmptyRegion("X0 與 X1 都必須至少有一個盒子")
    P = np.asarray(P, dtype=float)
    gamma1 = max(box_max_quadratic(P, box)[0] for box in initial.boxes)
    gamma2 = min(box_min_quadratic(P, box)[0] for box in unsafe.boxes)
    return gamma1, gamma2


def level_sets_sos(P: np.ndarray, initial: Region, unsafe: Region, solver) -> Tuple[float, float]:
    """以 S-procedure SOS 條件求 γ1 的上界與 γ2 的下界"""
    values = []
    for region, kind in ((initial, 'initial'), (unsafe, 'unsafe')):
        problem = build_level_set_program(P, region, kind)
        solution = solver.solve(problem)
        if not solution.is_success:
            raise LevelGapFailure(f"{kind} 等高集 SOS 條件求解失敗: {solution.status}")
        values.append(float(solution.free('gamma')[0]))
    return values[0], values[1]


def extract_controller(H: PolyMatrix, P: np.ndarray, U0T: np.ndarray) -> PolyMatrix:
    """u(x) = U0T·H(x)·P·x，回傳 m×1"""
    n = P.shape[0]
    state = polyvector([Polynomial.variable(n, i) for i in range(n)])
    return (H.right_multiply(P) @ state).left_multiply(U0T)


def coupling_residual(H: PolyMatrix, P: np.ndarray, R0T: np.ndarray, transform: PolyMatrix) -> float:
    """R0T·H(x)·P − L(x) 所有係數的最大絕對值"""
    diff = H.left_multiply(R0T).right_multiply(P) - transform
    return max((abs(c) for row in range(diff.rows) for col in range(diff.cols)
                for _, c in diff[row, col].terms()), default=0.0)


def refine_coupling(H: PolyMatrix, Z: np.ndarray, R0T: np.ndarray, U0T: np.ndarray,
                    transform: PolyMatrix) -> PolyMatrix:
    """以最小範數修正 Δ 使 R0T(H+Δ) = L·Z，且 U0T·Δ = 0（控制器不變）"""
    N, T = R0T.shape
    m = U0T.shape[0]
    n = Z.shape[0]
    stacked_pinv = np.linalg.pinv(np.vstack([R0T, U0T]))
    target = transform.right_multiply(Z).coefficient_matrices()
    current = H.coefficient_matrices()
    corrections = {}
    for mono in set(target) | set(current):
        error = target.get(mono, np.zeros((N, n))) - R0T @ current.get(mono, np.zeros((T, n)))
        corrections[mono] = stacked_pinv @ np.vstack([error, np.zeros((m, n))])
    delta = PolyMatrix.from_coefficient_matrices(corrections, T, n, H.nvars)
    return H + delta


def certificate_from_matrix(P: np.ndarray, lam: float, pi: float, delta: float, state: Region, initial: Region,
                            unsafe: Region, H: Optional[PolyMatrix] = None, U0T: Optional[np.ndarray] = None,
                            level_set_solver=None) -> Certificate:
    """由給定的 P 組出證書（不檢查等高間隙）"""
    P = 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)
    lam_min = float(np.linalg.eigvalsh(P)[0])
    if lam_min <= 0:
        raise NotPositiveDefinite(f"P 不是正定矩陣 (λ_min = {lam_min:.3e})")
    rho, c = compute_rho_c(P, pi, delta)
    if level_set_solver is None:
        gamma1, gamma2 = level_sets(P, initial, unsafe)
    else:
        gamma1, gamma2 = level_sets_sos(P, initial, unsafe, level_set_solver)
    controller = extract_controller(H, P, U0T) if H is not None and U0T is not None else None
    return Certificate(P=P, lam=lam, pi=pi, rho=rho, c=c, gamma1=gamma1, gamma2=gamma2, delta=delta,
                       state=state, initial=initial, unsafe=unsafe, H=H, controller=controller)


def assemble_certificate(solution, program: SosProgram, state: Region, initial: Region, unsafe: Region,
                         level_set_solver=None) -> Certificate:
    """由 SDP 解組出證書

    Raises:
        NotPositiveDefinite: λ_min(Z) ≤ 0
        LevelGapFailure: γ2 ≤ γ1 或 c > γ2(1 − λ)
    """
    values = program.extract(solution)
    Z = 0.5 * (values['Z'] + values['Z'].T)
    z_min = float(np.linalg.eigvalsh(Z)[0])
    if z_min <= 0:
        raise NotPositiveDefinite(f"Z 不是正定矩陣 (λ_min = {z_min:.3e})")
    P = la.cho_solve(la.cho_factor(Z, lower=True), np.eye(Z.shape[0]))
    P = 0.5 * (P + P.T)
    H = refine_coupling(values['H'], Z, program.R0T, program.U0T, program.transform)
    cert = certificate_from_matrix(P, program.lam, program.pi, program.delta, state, initial, unsafe,
                                   H=H, U0T=program.U0T, level_set_solver=level_set_solver)
    residual = coupling_residual(H, P, program.R0T, program.transform)
    cert.provenance.update({
        'lambda': program.lam,
        'pi': program.pi,
        'coupling_residual': residual,
        'alpha': values['alpha'].to_json(),
        'solver': solution.summary(),
    })
    logger.info(f"證書: γ1={cert.gamma1:.6e}, γ2={cert.gamma2:.6e}, ρ={cert.rho:.6e}, c={cert.c:.6e}, "
                f"耦合殘差 {residual:.2e}")
    if not cert.level_gap_ok():
        raise LevelGapFailure(
            f"等高間隙不成立: γ1={cert.gamma1:.6e}, γ2={cert.gamma2:.6e}, c={cert.c:.6e}, "
            f"γ2(1−λ)={cert.gamma2 * (1 - cert.lam):.6e}")
    return cert


def level_gap_prefilter(lam: float, pi: float, delta: float, unsafe: Region) -> Tuple[bool, str]:
    """不需要 P 的必要條件：(1 + 1/π)·δ ≤ (1 − λ)·min_{X1} ‖x‖²

    由 c = (1+1/π)λ_max(P)δ ≤ γ2(1−λ) ≤ λ_max(P)(1−λ)·min‖x‖² 得到。
    """
    min_norm_sq = min(box_min_quadratic(np.eye(unsafe.dim), box)[0] for box in unsafe.boxes)
    lhs = (1.0 + 1.0 / pi) * delta
    rhs = (1.0 - lam) * min_norm_sq
    if lhs <= rhs:
        return True, ''
    return False, f"(1+1/π)δ = {lhs:.3e} > (1−λ)·min‖x‖² = {rhs:.3e}"
