"""
由軌跡資料建立 SOS 可行性條件，並以 Gram 矩陣參數化編譯成標準形式 SDP

只使用 TrajectoryData 中的資料矩陣（R0T、G0T、U、X1T）、δ 與 T；
不接觸真實系統。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BasisTooSmall, ConfigError, DegreeError, RankError, RegionError
from .plant import TrajectoryData, check_rank
from .polynomial import (Dictionary, Monomial, PolyMatrix, Polynomial, build_dictionary, factor_dictionary,
                         input_matrix)
from .regions import Box, Region
from .sdp_problem import SdpBuilder, SdpProblem

logger = logging.getLogger('SosCompiler')

TRACE = 'trace'
FEASIBILITY = 'feasibility'

# 仿射式：鍵 → 係數；鍵 None 為常數項，('X', 區塊, p, q) 為半正定區塊元素 (p ≤ q)，('z', i) 為自由變數
Affine = Dict[Optional[tuple], float]
# 係數為仿射式的多項式
AffinePoly = Dict[Monomial, Affine]


# ---- 仿射多項式運算 ----
def _accumulate(target: Affine, source: Affine, scale: float = 1.0):
    for key, coef in source.items():
        target[key] = target.get(key, 0.0) + scale * coef


def ap_add(*polys: AffinePoly, scales: Optional[Sequence[float]] = None) -> AffinePoly:
    result: AffinePoly = {}
    scales = scales or [1.0] * len(polys)
    for poly, s in zip(polys, scales):
        if s == 0.0:
            continue
        for mono, affine in poly.items():
            _accumulate(result.setdefault(mono, {}), affine, s)
    return result


def ap_scale(poly: AffinePoly, factor: float) -> AffinePoly:
    return ap_add(poly, scales=[factor])


def ap_mul_poly(poly: AffinePoly, p: Polynomial) -> AffinePoly:
    result: AffinePoly = {}
    for mono, affine in poly.items():
        for pm, pc in p.terms():
            _accumulate(result.setdefault(mono * pm, {}), affine, pc)
    return result


def ap_from_polynomial(p: Polynomial) -> AffinePoly:
    return {mono: {None: coef} for mono, coef in p.terms()}


def ap_matrix_entry(blk: int, p: int, q: int, nvars: int, scale: float = 1.0) -> AffinePoly:
    key = ('X', blk, p, q) if p <= q else ('X', blk, q, p)
    return {Monomial.one(nvars): {key: scale}}


def gram_form(blk: int, basis: Dictionary) -> AffinePoly:
    """zᵀQz 的仿射多項式，Q 為區塊 blk"""
    result: AffinePoly = {}
    for a, za in enumerate(basis):
        for b, zb in enumerate(basis):
            key = ('X', blk, a, b) if a <= b else ('X', blk, b, a)
            affine = result.setdefault(za * zb, {})
            affine[key] = affine.get(key, 0.0) + 1.0
    return result


def _product_map(basis: Dictionary) -> Dict[Monomial, List[Tuple[int, int]]]:
    table: Dict[Monomial, List[Tuple[int, int]]] = {}
    for a, za in enumerate(basis):
        for b, zb in enumerate(basis):
            table.setdefault(za * zb, []).append((a, b))
    return table


def _split_affine(affine: Affine, scale: float = 1.0):
    """仿射式 → (矩陣項, 自由變數項, 常數)"""
    matrix_terms, free_terms, const = [], [], 0.0
    for key, coef in affine.items():
        if coef == 0.0:
            continue
        if key is None:
            const += scale * coef
        elif key[0] == 'X':
            matrix_terms.append((key[1], key[2], key[3], scale * coef))
        else:
            free_terms.append((key[1], scale * coef))
    return matrix_terms, free_terms, const


def gram_parameterize(builder: SdpBuilder, name: str, entries: Dict[Tuple[int, int], AffinePoly], size: int,
                      basis: Dictionary) -> int:
    """以 Gram 矩陣 Q ⪰ 0 表示 s×s 多項式矩陣 M(x) = (I_s ⊗ z)ᵀ Q (I_s ⊗ z)

    Args:
        builder: SDP 建構器
        name: Gram 區塊名稱
        entries: 上三角元素 (i, j), i ≤ j → 仿射多項式；缺少的元素視為零
        size: s
        basis: 單項式基底 z(x)

    Returns:
        int: Gram 區塊索引

    Raises:
        BasisTooSmall: 某個單項式無法由 z_a z_b 湊出
    """
    nz = len(basis)
    blk = builder.add_block(name, size * nz)
    products = _product_map(basis)
    for i in range(size):
        for j in range(i, size):
            entry = entries.get((i, j), {})
            for mono, affine in entry.items():
                if mono not in products and any(c != 0.0 for c in affine.values()):
                    raise BasisTooSmall(f"{name}[{i},{j}] 的單項式 {mono} 超出 Gram 基底的範圍")
            for mono, pairs in products.items():
                matrix_terms = [(blk, i * nz + a, j * nz + b, 1.0) for a, b in pairs]
                extra_matrix, free_terms, const = _split_affine(entry.get(mono, {}), -1.0)
                builder.add_equality(matrix_terms + extra_matrix, free_terms, -const)
    return blk


def sos_feasibility_problem(target, basis: Dictionary) -> SdpProblem:
    """純數值多項式（或對稱 PolyMatrix）是否為 SOS 的可行性問題，Gram 區塊名為 'Q'"""
    if isinstance(target, Polynomial):
        target = PolyMatrix([[target]], target.nvars)
    builder = SdpBuilder()
    entries = {(i, j): ap_from_polynomial(target[i, j]) for i in range(target.rows) for j in range(i, target.cols)}
    gram_parameterize(builder, 'Q', entries, target.rows, basis)
    return builder.build()


@dataclass
class ProgramDegrees:
    deg_H: int
    deg_alpha: int
    deg_varpi: int
    gram_degree: int
    off_diagonal: int
    diagonal: int


@dataclass
class SosProgram:
    """固定 λ、π 之後的 SOS 可行性條件（尚未編譯）"""
    R0T: np.ndarray
    G0T: np.ndarray
    U0T: np.ndarray
    X1T: np.ndarray
    delta: float
    transform: PolyMatrix
    g_dictionary: Dictionary
    state_box: Box
    lam: float
    pi: float
    degrees: ProgramDegrees
    eps_pd: float = 1e-3
    alpha_min: float = 1e-9
    objective: str = TRACE
    h_monomials: Dictionary = None
    gram_basis: Dictionary = None
    varpi_basis: Dictionary = None
    alpha_basis: Optional[Dictionary] = None
    _problem: Optional[SdpProblem] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X1T.shape[0]

    @property
    def T(self) -> int:
        return self.X1T.shape[1]

    @property
    def m(self) -> int:
        return self.U0T.shape[0]

    @property
    def N(self) -> int:
        return self.R0T.shape[0]

    @property
    def N_hat(self) -> int:
        return self.G0T.shape[0]

    @property
    def block_size(self) -> int:
        """2n + N + N̂"""
        return 2 * self.n + self.N + self.N_hat

    @property
    def num_multipliers(self) -> int:
        return self.state_box.dim

    def h_index(self, t: int, c: int, mono_index: int) -> int:
        return (t * self.n + c) * len(self.h_monomials) + mono_index

    def input_gain(self) -> PolyMatrix:
        return input_matrix(self.g_dictionary, self.m)

    def data_blocks(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(X1T X1Tᵀ − TδI, −X1T R̂ᵀ, R̂R̂ᵀ)，R̂ = [R0T; G0T]"""
        stacked = np.vstack([self.R0T, self.G0T])
        d11 = self.X1T @ self.X1T.T - self.T * self.delta * np.eye(self.n)
        d12 = -self.X1T @ stacked.T
        d22 = stacked @ stacked.T
        return d11, d12, d22

    def summary(self) -> dict:
        result = {
            'n': self.n, 'm': self.m, 'T': self.T, 'N': self.N, 'N_hat': self.N_hat,
            'lambda': self.lam, 'pi': self.pi, 'delta': self.delta,
            'matrix_size': self.block_size,
            'degrees': self.degrees.__dict__.copy(),
            'gram_basis_size': len(self.gram_basis),
            'gram_block_size': self.block_size * len(self.gram_basis),
            'h_monomials': len(self.h_monomials),
            'objective': self.objective,
        }
        if self._problem is not None:
            result['sdp'] = self._problem.summary()
        return result

    # ---- 解的擷取 ----
    def extract(self, solution) -> dict:
        """從 SdpSolution 取出 Z、H(x)、α(x)、ϖ(x) 與 Gram 矩陣"""
        n = self.n
        Z = solution.block('Z') + self.eps_pd * np.eye(n)
        h_values = solution.free('H')
        grid = []
        for t in range(self.T):
            row = []
            for c in range(n):
                terms = {mono: h_values[self.h_index(t, c, k)] for k, mono in enumerate(self.h_monomials)}
                row.append(Polynomial(n, terms))
            grid.append(row)
        H = PolyMatrix(grid, n)
        if self.alpha_basis is None:
            alpha = Polynomial.constant(n, self.alpha_min + float(solution.block('alpha')[0, 0]))
        else:
            alpha = _gram_polynomial(solution.block('alpha_gram'), self.alpha_basis) + self.alpha_min
        varpi = [_gram_polynomial(solution.block(f'varpi_{i}'), self.varpi_basis)
                 for i in range(self.num_multipliers)]
        return {'Z': Z, 'H': H, 'alpha': alpha, 'varpi': varpi, 'gram': solution.block('M')}

    def evaluate_matrix(self, values: dict, x) -> np.ndarray:
        """以擷取出的數值 (Z, H, α, ϖ) 直接計算 M(x)"""
        x = np.asarray(x, dtype=float)
        n, N, Nh = self.n, self.N, self.N_hat
        Z, H = values['Z'], values['H'].evaluate(x)
        alpha = values['alpha'].evaluate(x)
        beta = np.array([b.evaluate(x) for b in self.state_box.beta()])
        slack = float(sum(v.evaluate(x) * b for v, b in zip(values['varpi'], beta)))
        r_tilde = np.vstack([self.R0T, self.input_gain().evaluate(x) @ self.U0T])
        coupling = r_tilde @ H
        d11, d12, d22 = self.data_blocks()
        s = self.block_size
        M = np.zeros((s, s))
        mid = slice(n, n + N + Nh)
        last = slice(n + N + Nh, s)
        M[:n, :n] = self.lam * Z + alpha * d11
        M[:n, mid] = alpha * d12
        M[mid, :n] = alpha * d12.T
        M[mid, mid] = alpha * d22
        M[mid, last] = -coupling
        M[last, mid] = -coupling.T
        M[last, last] = Z / (1.0 + self.pi)
        return M - slack * np.eye(s)

    def gram_reconstruct(self, gram: np.ndarray, x) -> np.ndarray:
        """(I_s ⊗ z(x))ᵀ Q (I_s ⊗ z(x))"""
        z = self.gram_basis.evaluate(np.asarray(x, dtype=float))
        lift = np.kron(np.eye(self.block_size), z.reshape(-1, 1))
        return lift.T @ gram @ lift


def _gram_polynomial(Q: np.ndarray, basis: Dictionary) -> Polynomial:
    terms: Dict[Monomial, float] = {}
    for a, za in enumerate(basis):
        for b, zb in enumerate(basis):
            mono = za * zb
            terms[mono] = terms.get(mono, 0.0) + Q[a, b]
    return Polynomial(basis.nvars, terms)


def resolve_degrees(transform: PolyMatrix, g_dictionary: Dictionary, deg_H: Optional[int] = None,
                    deg_alpha: int = 0, deg_varpi: Optional[int] = None,
                    gram_degree: Optional[int] = None) -> ProgramDegrees:
    """決定 H、ϖ 與 Gram 基底的次數

    deg_H 未指定時預設 1，並提高到 L(x) 的最高次數；明確指定但低於該次數則拋出 DegreeError。
    deg_ϖ 未指定時預設 2，並提高到滿足 deg_ϖ + 2 ≥ 非對角次數的最小偶數。
    """
    transform_degree = transform.max_degree
    if deg_H is None:
        deg_H = 1
        if deg_H < transform_degree:
            logger.warning(f"deg_H 由 1 提高到 {transform_degree}（L(x) 的最高次數），否則耦合等式只能有 Z = 0")
            deg_H = transform_degree
    elif deg_H < transform_degree:
        raise DegreeError(f"deg_H={deg_H} 低於 L(x) 的次數 {transform_degree}，耦合等式無法在 Z ≻ 0 下成立")
    if deg_H < 0:
        raise DegreeError(f"deg_H 必須 ≥ 0: {deg_H}")
    if deg_alpha < 0 or deg_alpha % 2:
        raise DegreeError(f"deg_alpha 必須為非負偶數: {deg_alpha}")
    off_diagonal = max(deg_H, g_dictionary.max_degree + deg_H, deg_alpha)
    if deg_varpi is None:
        deg_varpi = 2
        needed = max(2, off_diagonal - 2)
        needed += needed % 2
        if needed > deg_varpi:
            logger.warning(f"deg_varpi 由 2 提高到 {needed}，使對角項次數不低於非對角項")
            deg_varpi = needed
    elif deg_varpi < 0 or deg_varpi % 2:
        raise DegreeError(f"deg_varpi 必須為非負偶數: {deg_varpi}")
    diagonal = max(deg_varpi + 2, deg_alpha)
    top = max(diagonal, off_diagonal)
    required = int(math.ceil(top / 2))
    if gram_degree is None:
        gram_degree = required
    elif gram_degree < required:
        raise DegreeError(f"Gram 基底次數 {gram_degree} 不足以表示次數 {top} 的元素（至少需要 {required}）")
    return ProgramDegrees(deg_H, deg_alpha, deg_varpi, gram_degree, off_diagonal, diagonal)


def build_feasibility_program(data: TrajectoryData, transform: PolyMatrix, g_dictionary: Dictionary,
                              state_region: Region, lam: float, pi: float, deg_H: Optional[int] = None,
                              deg_alpha: int = 0, deg_varpi: Optional[int] = None, eps_pd: float = 1e-3,
                              alpha_min: float = 1e-9, gram_degree: Optional[int] = None,
                              objective: str = TRACE, require_rank: bool = True) -> SosProgram:
    """建立固定 λ、π 的可行性條件

    Args:
        data: 軌跡資料
        transform: L(x)，滿足 R(x) = L(x) x
        g_dictionary: G 字典 g(x)，𝒢(x) = I_m ⊗ g(x)
        state_region: 狀態集 X（單一盒子）
        lam: λ ∈ (0, 1]
        pi: π > 0
        deg_H / deg_alpha / deg_varpi / gram_degree: 次數設定，None 表示自動決定
        eps_pd: Z ⪰ eps_pd·I
        alpha_min: α(x) ≥ alpha_min
        objective: 'trace' 最小化 trace(Z)，'feasibility' 純可行性
        require_rank: 是否檢查 R0T 列滿秩

    Returns:
        SosProgram: 尚未編譯的程式
    """
    if not 0.0 < lam <= 1.0:
        raise ConfigError(f"λ 必須在 (0, 1]: {lam}")
    if not pi > 0.0:
        raise ConfigError(f"π 必須 > 0: {pi}")
    if objective not in (TRACE, FEASIBILITY):
        raise ConfigError(f"未知的目標函數: {objective}")
    if not state_region.is_single_box:
        raise RegionError("狀態集 X 必須是單一盒子")
    if transform.rows != data.N or transform.cols != data.n:
        raise DegreeError(f"L(x) 大小 {transform.shape} 應為 {(data.N, data.n)}")
    if len(g_dictionary) * data.m != data.N_hat:
        raise DegreeError(f"G 字典大小 {len(g_dictionary)}×m={data.m} 與 G0T 列數 {data.N_hat} 不符")
    if require_rank:
        report = check_rank(data.R0T)
        if not report.full_row_rank:
            raise RankError(f"R0T 未達列滿秩: {report.reason}")

    degrees = resolve_degrees(transform, g_dictionary, deg_H, deg_alpha, deg_varpi, gram_degree)
    n = data.n
    program = SosProgram(
        R0T=data.R0T, G0T=data.G0T, U0T=data.U, X1T=data.X1T, delta=data.delta,
        transform=transform, g_dictionary=g_dictionary, state_box=state_region.boxes[0],
        lam=lam, pi=pi, degrees=degrees, eps_pd=eps_pd, alpha_min=alpha_min, objective=objective,
        h_monomials=build_dictionary(n, degrees.deg_H, include_constant=True) if degrees.deg_H > 0
        else Dictionary([Monomial.one(n)], Dictionary.G, n),
        gram_basis=build_dictionary(n, degrees.gram_degree, include_constant=True) if degrees.gram_degree > 0
        else Dictionary([Monomial.one(n)], Dictionary.G, n),
        varpi_basis=build_dictionary(n, degrees.deg_varpi // 2, include_constant=True) if degrees.deg_varpi > 0
        else Dictionary([Monomial.one(n)], Dictionary.G, n),
        alpha_basis=build_dictionary(n, deg_alpha // 2, include_constant=True) if deg_alpha > 0 else None,
    )
    logger.info(f"建立可行性條件: λ={lam}, π={pi}, 矩陣大小 {program.block_size}, 次數 {degrees}")
    return program


def compile_program(program: SosProgram) -> SdpProblem:
    """Gram 參數化所有 SOS 條件並組成單一線性系統

    區塊順序：Z（Z = Z̃ + eps·I）、alpha 或 alpha_gram、varpi_i、M；自由變數群組 H。
    """
    n, T, N, Nh = program.n, program.T, program.N, program.N_hat
    one = Monomial.one(n)
    builder = SdpBuilder()

    blk_z = builder.add_block('Z', n)
    if program.alpha_basis is None:
        blk_alpha = builder.add_block('alpha', 1)
        alpha = {one: {('X', blk_alpha, 0, 0): 1.0, None: program.alpha_min}}
    else:
        blk_alpha = builder.add_block('alpha_gram', len(program.alpha_basis))
        alpha = ap_add(gram_form(blk_alpha, program.alpha_basis), {one: {None: program.alpha_min}})
    slack: AffinePoly = {}
    for i, beta in enumerate(program.state_box.beta()):
        blk = builder.add_block(f'varpi_{i}', len(program.varpi_basis))
        slack = ap_add(slack, ap_mul_poly(gram_form(blk, program.varpi_basis), beta))

    nh = len(program.h_monomials)
    labels = [f"{t},{c},{mono}" for t in range(T) for c in range(n) for mono in program.h_monomials]
    builder.add_free('H', labels)

    def z_entry(p: int, q: int, scale: float) -> AffinePoly:
        entry = ap_matrix_entry(blk_z, p, q, n, scale)
        if p == q:
            entry[one][None] = scale * program.eps_pd
        return entry

    # 耦合等式 R0T·H(x) = L(x)·Z，每個 (列, 行, 單項式) 一條
    coupling_count = 0
    for r in range(N):
        row_terms = [(j, program.transform[r, j]) for j in range(n) if not program.transform[r, j].is_zero()]
        for c in range(n):
            for k, mono in enumerate(program.h_monomials):
                free_terms = [(program.h_index(t, c, k), program.R0T[r, t]) for t in range(T)
                              if program.R0T[r, t] != 0.0]
                matrix_terms, rhs = [], 0.0
                for j, ell in row_terms:
                    coef = ell.coefficient(mono)
                    if coef == 0.0:
                        continue
                    p, q = (j, c) if j <= c else (c, j)
                    matrix_terms.append((blk_z, p, q, -coef))
                    if j == c:
                        rhs += coef * program.eps_pd
                if not free_terms and not matrix_terms:
                    if rhs != 0.0:
                        raise DegreeError(f"耦合等式第 ({r},{c}) 項在單項式 {mono} 無解")
                    continue
                builder.add_equality(matrix_terms, free_terms, rhs)
                coupling_count += 1
        for j, ell in row_terms:
            for mono in ell.monomials():
                if mono not in program.h_monomials.monomials:
                    raise DegreeError(f"L(x) 的單項式 {mono} 超出 H(x) 的次數 {program.degrees.deg_H}")

    # R̃(x)H(x) 的仿射多項式，R̃ = [R0T; 𝒢(x)U0T]
    gsize = len(program.g_dictionary)

    def coupling_entry(r: int, c: int) -> AffinePoly:
        result: AffinePoly = {}
        if r < N:
            weights, shift = program.R0T[r], one
        else:
            i, a = divmod(r - N, gsize)
            weights, shift = program.U0T[i], program.g_dictionary[a]
        for k, mono in enumerate(program.h_monomials):
            affine = {('z', program.h_index(t, c, k)): w for t, w in enumerate(weights) if w != 0.0}
            if affine:
                result[mono * shift] = affine
        return result

    d11, d12, d22 = program.data_blocks()
    s = program.block_size
    mid0, last0 = n, n + N + Nh
    entries: Dict[Tuple[int, int], AffinePoly] = {}
    for i in range(n):
        for j in range(i, n):
            entries[(i, j)] = ap_add(z_entry(i, j, program.lam), ap_scale(alpha, d11[i, j]))
        for j in range(N + Nh):
            entries[(i, mid0 + j)] = ap_scale(alpha, d12[i, j])
    for i in range(N + Nh):
        for j in range(i, N + Nh):
            entries[(mid0 + i, mid0 + j)] = ap_scale(alpha, d22[i, j])
        for c in range(n):
            entries[(mid0 + i, last0 + c)] = ap_scale(coupling_entry(i, c), -1.0)
    for i in range(n):
        for j in range(i, n):
            entries[(last0 + i, last0 + j)] = z_entry(i, j, 1.0 / (1.0 + program.pi))
    for i in range(s):
        entries[(i, i)] = ap_add(entries.get((i, i), {}), slack, scales=[1.0, -1.0])

    gram_parameterize(builder, 'M', entries, s, program.gram_basis)

    if program.objective == TRACE:
        builder.add_objective([(blk_z, i, i, 1.0) for i in range(n)])

    problem = builder.build()
    program._problem = problem
    logger.info(f"編譯完成: 耦合等式 {coupling_count} 條, 總約束 {problem.num_constraints} 條, "
                f"區塊大小 {problem.block_sizes}, H 變數 {T * n * nh} 個")
    return problem


def build_sos_problem(data: TrajectoryData, transform: PolyMatrix, g_dictionary: Dictionary, state_region: Region,
                      lam: float, pi: float, **options) -> Tuple[SosProgram, SdpProblem]:
    program = build_feasibility_program(data, transform, g_dictionary, state_region, lam, pi, **options)
    return program, compile_program(program)


def build_level_set_program(P: np.ndarray, region: Region, kind: str) -> SdpProblem:
    """以 S-procedure 求 B(x) = xᵀPx 在區域上的等高界

    kind='initial'：最小化 γ 使每個盒子上 γ − B(x) − Σσ_i β_i(x) 為 SOS（γ 為 max B 的上界）
    kind='unsafe'：最大化 γ 使每個盒子上 B(x) − γ − Σσ_i β_i(x) 為 SOS（γ 為 min B 的下界）
    σ_i ≥ 0 為常數乘子；γ 為自由變數 'gamma'。
    """
    if kind not in ('initial', 'unsafe'):
        raise ConfigError(f"未知的等高集類型: {kind}")
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if region.dim != n:
        raise RegionError(f"區域維度 {region.dim} 與 P 的大小 {n} 不符")
    one = Monomial.one(n)
    sign = -1.0 if kind == 'initial' else 1.0
    barrier: AffinePoly = {}
    for i in range(n):
        for j in range(n):
            mono = Monomial.variable(n, i) * Monomial.variable(n, j)
            affine = barrier.setdefault(mono, {})
            affine[None] = affine.get(None, 0.0) + sign * P[i, j]

    builder = SdpBuilder()
    builder.add_free('gamma', ['gamma'])
    gamma = {one: {('z', 0): -sign}}
    basis = build_dictionary(n, 1, include_constant=True)
    for b, box in enumerate(region.boxes):
        target = ap_add(barrier, gamma)
        for i, beta in enumerate(box.beta()):
            blk = builder.add_block(f'sigma_{b}_{i}', 1)
            target = ap_add(target, ap_mul_poly({one: {('X', blk, 0, 0): 1.0}}, beta), scales=[1.0, -1.0])
        gram_parameterize(builder, f'gram_{b}', {(0, 0): target}, 1, basis)
    builder.add_objective(free_terms=[(0, 1.0 if kind == 'initial' else -1.0)])
    return builder.build()


def default_transform(r_dictionary: Dictionary) -> PolyMatrix:
    return factor_dictionary(r_dictionary)
