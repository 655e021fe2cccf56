"""
以 SVG 1.1 繪出區域、等位橢圓 {B = γ1}、{B = γ2} 的投影與軌跡
"""
import itertools
import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .certificate import Certificate
from .closed_loop import SimulationRun
from .errors import DimensionMismatch
from .regions import Region

logger = logging.getLogger('SvgRender')

CURVE_POINTS = 720
WIDTH = 640
HEIGHT = 640
MARGIN = 40

COLORS = {
    'state': '#444444',
    'initial': '#2e8b57',
    'unsafe': '#d62728',
    'gamma1': '#1f77b4',
    'gamma2': '#ff7f0e',
    'trajectory': '#7f7f7f',
}


def projected_ellipse(P: np.ndarray, gamma: float, axes: Tuple[int, int], points: int = CURVE_POINTS) -> np.ndarray:
    """{xᵀPx ≤ γ} 在兩個座標軸上的投影（影子）邊界

    投影集合為 {yᵀ S y ≤ γ}，S 為 P 對其餘座標的 Schur 補。

    Returns:
        np.ndarray: (points, 2)
    """
    n = P.shape[0]
    keep = list(axes)
    rest = [i for i in range(n) if i not in keep]
    S = P[np.ix_(keep, keep)]
    if rest:
        S = S - P[np.ix_(keep, rest)] @ np.linalg.solve(P[np.ix_(rest, rest)], P[np.ix_(rest, keep)])
    L = np.linalg.cholesky(S)
    theta = np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)
    circle = np.vstack([np.cos(theta), np.sin(theta)])
    return (np.sqrt(gamma) * np.linalg.solve(L.T, circle)).T


class _Canvas:
    """資料座標到畫布座標的轉換"""

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        span = np.maximum(upper - lower, 1e-12)
        self.lower = lower
        self.scale = min((WIDTH - 2 * MARGIN) / span[0], (HEIGHT - 2 * MARGIN) / span[1])
        self.elements: List[str] = []

    def point(self, x: float, y: float) -> Tuple[float, float]:
        return (MARGIN + (x - self.lower[0]) * self.scale, HEIGHT - MARGIN - (y - self.lower[1]) * self.scale)

    def rect(self, low: Sequence[float], high: Sequence[float], color: str, fill_opacity: float):
        x0, y1 = self.point(low[0], low[1])
        x1, y0 = self.point(high[0], high[1])
        self.elements.append(
            f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" height="{y1 - y0:.2f}" '
            f'fill="{color}" fill-opacity="{fill_opacity}" stroke="{color}" stroke-width="1"/>')

    def polyline(self, xy: np.ndarray, color: str, width: float = 1.0, closed: bool = False, dash: str = ''):
        finite = np.all(np.isfinite(xy), axis=1)
        xy = xy[finite]
        if xy.shape[0] < 2:
            return
        coords = ' '.join('%.2f,%.2f' % self.point(x, y) for x, y in xy)
        tag = 'polygon' if closed else 'polyline'
        extra = f' stroke-dasharray="{dash}"' if dash else ''
        self.elements.append(f'<{tag} points="{coords}" fill="none" stroke="{color}" '
                             f'stroke-width="{width}"{extra}/>')

    def text(self, x: float, y: float, label: str):
        self.elements.append(f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="12">{label}</text>')

    def document(self) -> str:
        body = '\n  '.join(self.elements)
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">\n  <rect width="100%" height="100%" fill="white"/>\n  {body}\n</svg>\n')


def _draw_region(canvas: _Canvas, region: Region, axes: Tuple[int, int], color: str, opacity: float):
    i, j = axes
    for box in region.boxes:
        canvas.rect((box.lower[i], box.lower[j]), (box.upper[i], box.upper[j]), color, opacity)


def render_svg(runs: List[SimulationRun], cert: Certificate, axes: Tuple[int, int], path: str,
               title: Optional[str] = None):
    """繪出單一投影

    Args:
        runs: 軌跡（可為空，僅繪區域與等位線）
        cert: 證書
        axes: 投影的座標軸 (i, j)，0 起算
        path: 輸出 SVG 路徑
    """
    n = cert.n
    i, j = axes
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise DimensionMismatch(f"投影軸 {axes} 對 {n} 維狀態無效")
    lower = np.array([min(b.lower[i] for b in cert.state.boxes), min(b.lower[j] for b in cert.state.boxes)])
    upper = np.array([max(b.upper[i] for b in cert.state.boxes), max(b.upper[j] for b in cert.state.boxes)])
    canvas = _Canvas(lower, upper)

    _draw_region(canvas, cert.state, axes, COLORS['state'], 0.0)
    _draw_region(canvas, cert.initial, axes, COLORS['initial'], 0.25)
    _draw_region(canvas, cert.unsafe, axes, COLORS['unsafe'], 0.25)
    for run in runs:
        canvas.polyline(run.states[[i, j], :].T, COLORS['trajectory'], 0.6)
    canvas.polyline(projected_ellipse(cert.P, cert.gamma1, axes), COLORS['gamma1'], 1.5, closed=True)
    canvas.polyline(projected_ellipse(cert.P, cert.gamma2, axes), COLORS['gamma2'], 1.5, closed=True, dash='6,3')

    canvas.text(MARGIN, MARGIN - 12, title or f'x{i + 1} - x{j + 1}')
    canvas.text(WIDTH - MARGIN - 120, MARGIN - 12, f'B=γ1 {cert.gamma1:.4g}')
    canvas.text(WIDTH - MARGIN - 120, MARGIN + 2, f'B=γ2 {cert.gamma2:.4g}')

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(canvas.document())
    logger.info(f"已繪製 {path}（{len(runs)} 條軌跡）")


def render_projections(runs: List[SimulationRun], cert: Certificate, directory: str,
                       prefix: str = 'trajectories') -> List[str]:
    """二維狀態繪一張；三維以上繪出每一對座標軸的投影"""
    paths = []
    for axes in itertools.combinations(range(cert.n), 2):
        path = os.path.join(directory, f'{prefix}_x{axes[0] + 1}x{axes[1] + 1}.svg')
        render_svg(runs, cert, axes, path)
        paths.append(path)
    return paths
