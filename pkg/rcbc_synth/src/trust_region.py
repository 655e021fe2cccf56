"""
二次函數在歐氏球上的精確最大化（信賴域子問題）

    max_{‖w‖² ≤ δ}  B(x̂ + w) − ρ‖w‖²,   B(x) = xᵀPx

等價於 min wᵀ(ρI − P)w − 2(Px̂)ᵀw；以特徵分解與 Lagrange 乘子的
長期方程 (secular equation) 求全域解，包含 hard case。
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

logger = logging.getLogger('TrustRegion')

# 判斷 hard case 時，特徵向量方向上的梯度分量視為零的門檻
HARD_CASE_RTOL = 1e-10


@dataclass
class TrustRegionResult:
    w: np.ndarray
    value: float
    multiplier: float
    on_boundary: bool
    hard_case: bool = False


class TrustRegionSolver:
    """對固定的 (P, ρ) 快取特徵分解，重複求解不同 x̂、δ"""

    def __init__(self, P: np.ndarray, rho: float):
        self.P = np.asarray(P, dtype=float)
        self.rho = float(rho)
        n = self.P.shape[0]
        # 目標 min ½wᵀHw + cᵀw，H = 2(ρI − P)
        self.hessian_eigs, self.eigvecs = np.linalg.eigh(2.0 * (self.rho * np.eye(n) - self.P))

    def objective(self, x_hat: np.ndarray, w: np.ndarray) -> float:
        x_next = x_hat + w
        return float(x_next @ self.P @ x_next - self.rho * (w @ w))

    def solve(self, x_hat, delta: float) -> TrustRegionResult:
        """回傳使 B(x̂+w) − ρ‖w‖² 最大的 w"""
        x_hat = np.asarray(x_hat, dtype=float)
        n = x_hat.shape[0]
        if delta <= 0:
            w = np.zeros(n)
            return TrustRegionResult(w, self.objective(x_hat, w), 0.0, False)
        radius = np.sqrt(delta)
        h = self.hessian_eigs
        c_tilde = self.eigvecs.T @ (-2.0 * self.P @ x_hat)
        c_norm = float(np.linalg.norm(c_tilde))
        h_min = float(h[0])
        scale = max(1.0, float(np.max(np.abs(h))))

        # 內部解：H 正定且無約束極小點落在球內
        if h_min > 0:
            coef = -c_tilde / h
            if float(np.linalg.norm(coef)) <= radius:
                w = self.eigvecs @ coef
                return TrustRegionResult(w, self.objective(x_hat, w), 0.0, False)

        base = max(0.0, -h_min)
        flat = np.abs(h - h_min) <= HARD_CASE_RTOL * scale
        if h_min <= 0 and np.all(np.abs(c_tilde[flat]) <= HARD_CASE_RTOL * max(c_norm, scale)):
            shifted = np.where(flat, 1.0, h + base)
            coef = np.where(flat, 0.0, -c_tilde / shifted)
            norm = float(np.linalg.norm(coef))
            if norm <= radius:
                # hard case：沿最小特徵方向補足到球面
                coef[int(np.argmax(flat))] = np.sqrt(max(radius ** 2 - norm ** 2, 0.0))
                w = self.eigvecs @ coef
                return TrustRegionResult(w, self.objective(x_hat, w), base, True, True)

        def secular(mu: float) -> float:
            return float(np.linalg.norm(c_tilde / (h + mu))) - radius

        low = base if h_min > 0 else base + 1e-13 * scale
        high = base + c_norm / radius + 1e-13 * scale
        if secular(low) <= 0:
            mu = low
        else:
            mu = brentq(secular, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        coef = -c_tilde / (h + mu)
        norm = float(np.linalg.norm(coef))
        if norm > 0:
            coef *= radius / norm
        w = self.eigvecs @ coef
        return TrustRegionResult(w, self.objective(x_hat, w), mu, True)


def worst_case_disturbance(P: np.ndarray, rho: float, x_hat, delta: float) -> TrustRegionResult:
    """單次求解的便利函式"""
    return TrustRegionSolver(P, rho).solve(x_hat, delta)
