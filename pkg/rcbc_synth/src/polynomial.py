"""
稀疏多變數多項式運算

Monomial / Polynomial / PolyMatrix / Dictionary 皆為建構後不可變的物件，
可在平行工作間共用。單項式排序固定為分級字典序（先依總次數遞增，
同次數時 x1 的次方較高者在前）。
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb

from .errors import DimensionMismatch, FactorError

logger = logging.getLogger('Polynomial')

# 相對剪除門檻
PRUNE_RTOL = 1e-14


@dataclass(frozen=True)
class Monomial:
    """單項式 x1^e1 · ... · xn^en"""
    exponents: Tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError(f"次方不可為負: {self.exponents}")

    @classmethod
    def one(cls, nvars: int) -> 'Monomial':
        return cls((0,) * nvars)

    @classmethod
    def variable(cls, nvars: int, index: int) -> 'Monomial':
        exps = [0] * nvars
        exps[index] = 1
        return cls(tuple(exps))

    @property
    def nvars(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def sort_key(self) -> Tuple:
        return (self.degree, tuple(-e for e in self.exponents))

    def __mul__(self, other: 'Monomial') -> 'Monomial':
        if self.nvars != other.nvars:
            raise DimensionMismatch(f"變數個數不符: {self.nvars} != {other.nvars}")
        return Monomial(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def divides(self, other: 'Monomial') -> bool:
        return all(a <= b for a, b in zip(self.exponents, other.exponents))

    def __truediv__(self, other: 'Monomial') -> 'Monomial':
        if not other.divides(self):
            raise ValueError(f"{other} 無法整除 {self}")
        return Monomial(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def evaluate(self, x: Sequence[float]) -> float:
        if len(x) != self.nvars:
            raise DimensionMismatch(f"輸入維度 {len(x)} 與變數個數 {self.nvars} 不符")
        value = 1.0
        for xi, e in zip(x, self.exponents):
            if e:
                value *= float(xi) ** e
        return value

    def to_json(self) -> List[int]:
        return list(self.exponents)

    def __str__(self) -> str:
        parts = []
        for i, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        return '*'.join(parts) if parts else '1'


def sort_monomials(monomials: Iterable[Monomial]) -> List[Monomial]:
    return sorted(monomials, key=Monomial.sort_key)


def _prune(terms: Dict[Monomial, float], scale: float) -> Dict[Monomial, float]:
    threshold = PRUNE_RTOL * scale
    return {mono: coef for mono, coef in terms.items() if coef != 0.0 and abs(coef) > threshold}


class Polynomial:
    """稀疏多項式：單項式 → 實係數"""

    __slots__ = ('nvars', '_terms', '_compiled')

    def __init__(self, nvars: int, terms: Optional[Mapping[Union[Monomial, Tuple[int, ...]], float]] = None,
                 scale: Optional[float] = None):
        self.nvars = int(nvars)
        collected: Dict[Monomial, float] = {}
        for mono, coef in (terms or {}).items():
            if not isinstance(mono, Monomial):
                mono = Monomial(tuple(int(e) for e in mono))
            if mono.nvars != self.nvars:
                raise DimensionMismatch(f"單項式 {mono} 的變數個數與多項式 ({self.nvars}) 不符")
            collected[mono] = collected.get(mono, 0.0) + float(coef)
        if scale is None:
            scale = max((abs(c) for c in collected.values()), default=0.0)
        self._terms = _prune(collected, scale)
        self._compiled = None

    # ---- 建構 ----
    @classmethod
    def zero(cls, nvars: int) -> 'Polynomial':
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: float) -> 'Polynomial':
        return cls(nvars, {Monomial.one(nvars): value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> 'Polynomial':
        return cls(nvars, {Monomial.variable(nvars, index): 1.0})

    @classmethod
    def from_monomial(cls, mono: Monomial, coef: float = 1.0) -> 'Polynomial':
        return cls(mono.nvars, {mono: coef})

    # ---- 查詢 ----
    @property
    def degree(self) -> int:
        return max((m.degree for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def terms(self) -> List[Tuple[Monomial, float]]:
        return [(m, self._terms[m]) for m in sort_monomials(self._terms)]

    def monomials(self) -> List[Monomial]:
        return sort_monomials(self._terms)

    def coefficient(self, mono: Monomial) -> float:
        return self._terms.get(mono, 0.0)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # ---- 運算 ----
    def _check(self, other: 'Polynomial'):
        if self.nvars != other.nvars:
            raise DimensionMismatch(f"變數個數不符: {self.nvars} != {other.nvars}")

    def __add__(self, other) -> 'Polynomial':
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, float(other))
        self._check(other)
        terms = dict(self._terms)
        for mono, coef in other._terms.items():
            terms[mono] = terms.get(mono, 0.0) + coef
        scale = max(self.max_abs_coefficient(), other.max_abs_coefficient())
        return Polynomial(self.nvars, terms, scale=scale)

    __radd__ = __add__

    def __neg__(self) -> 'Polynomial':
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> 'Polynomial':
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.nvars, float(other))
        return self + (-other)

    def __rsub__(self, other) -> 'Polynomial':
        return (-self) + other

    def __mul__(self, other) -> 'Polynomial':
        if not isinstance(other, Polynomial):
            return self.scale(float(other))
        self._check(other)
        terms: Dict[Monomial, float] = {}
        scale = 0.0
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = m1 * m2
                product = c1 * c2
                terms[mono] = terms.get(mono, 0.0) + product
                scale = max(scale, abs(product))
        return Polynomial(self.nvars, terms, scale=scale)

    def __rmul__(self, other) -> 'Polynomial':
        return self.scale(float(other))

    def scale(self, factor: float) -> 'Polynomial':
        return Polynomial(self.nvars, {m: factor * c for m, c in self._terms.items()})

    def __pow__(self, power: int) -> 'Polynomial':
        result = Polynomial.constant(self.nvars, 1.0)
        for _ in range(int(power)):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    # ---- 求值 ----
    def _compile(self):
        if self._compiled is None:
            monos = list(self._terms)
            exps = np.array([m.exponents for m in monos], dtype=float).reshape(len(monos), self.nvars)
            coefs = np.array([self._terms[m] for m in monos], dtype=float)
            self._compiled = (exps, coefs)
        return self._compiled

    def evaluate(self, x) -> Union[float, np.ndarray]:
        """在單點 (n,) 或批次 (k, n) 上求值"""
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.nvars:
            raise DimensionMismatch(f"輸入維度 {arr.shape[-1]} 與變數個數 {self.nvars} 不符")
        exps, coefs = self._compile()
        if arr.ndim == 1:
            if not len(coefs):
                return 0.0
            return float(np.prod(arr[None, :] ** exps, axis=1) @ coefs)
        if not len(coefs):
            return np.zeros(arr.shape[0])
        return np.prod(arr[:, None, :] ** exps[None, :, :], axis=2) @ coefs

    __call__ = evaluate

    # ---- 序列化 ----
    def to_json(self) -> List[dict]:
        return [{'exponents': m.to_json(), 'coeff': c} for m, c in self.terms()]

    @classmethod
    def from_json(cls, nvars: int, data: Iterable[dict]) -> 'Polynomial':
        return cls(nvars, {tuple(item['exponents']): item['coeff'] for item in data})

    def __repr__(self) -> str:
        if not self._terms:
            return '0'
        parts = []
        for mono, coef in reversed(self.terms()):
            parts.append(f"{coef:+.6g}" + ('' if mono.degree == 0 else f"*{mono}"))
        return ' '.join(parts)


class PolyMatrix:
    """多項式矩陣，所有元素共用相同的變數個數"""

    __slots__ = ('rows', 'cols', 'nvars', '_entries')

    # 讓 numpy 陣列 @ PolyMatrix 交給 __rmatmul__ 處理
    __array_ufunc__ = None

    def __init__(self, entries: Sequence[Sequence[Polynomial]], nvars: Optional[int] = None):
        grid = [list(row) for row in entries]
        self.rows = len(grid)
        self.cols = len(grid[0]) if grid else 0
        if nvars is None:
            if not self.rows or not self.cols:
                raise ValueError("空矩陣必須指定 nvars")
            nvars = grid[0][0].nvars
        self.nvars = int(nvars)
        for row in grid:
            if len(row) != self.cols:
                raise DimensionMismatch("每一列的元素個數必須相同")
            for entry in row:
                if entry.nvars != self.nvars:
                    raise DimensionMismatch("所有元素必須有相同的變數個數")
        self._entries = tuple(tuple(row) for row in grid)

    @classmethod
    def zeros(cls, rows: int, cols: int, nvars: int) -> 'PolyMatrix':
        return cls([[Polynomial.zero(nvars) for _ in range(cols)] for _ in range(rows)], nvars)

    @classmethod
    def from_numeric(cls, array, nvars: int) -> 'PolyMatrix':
        arr = np.atleast_2d(np.asarray(array, dtype=float))
        return cls([[Polynomial.constant(nvars, v) for v in row] for row in arr], nvars)

    @classmethod
    def from_coefficient_matrices(cls, coefficients: Mapping[Monomial, np.ndarray], rows: int, cols: int,
                                  nvars: int) -> 'PolyMatrix':
        grid = [[{} for _ in range(cols)] for _ in range(rows)]
        for mono, mat in coefficients.items():
            mat = np.asarray(mat, dtype=float).reshape(rows, cols)
            for i, j in zip(*np.nonzero(mat)):
                grid[i][j][mono] = mat[i, j]
        return cls([[Polynomial(nvars, grid[i][j]) for j in range(cols)] for i in range(rows)], nvars)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def entry(self, i: int, j: int) -> Polynomial:
        return self._entries[i][j]

    def __getitem__(self, index: Tuple[int, int]) -> Polynomial:
        i, j = index
        return self._entries[i][j]

    def row(self, i: int) -> Tuple[Polynomial, ...]:
        return self._entries[i]

    @property
    def max_degree(self) -> int:
        return max((p.degree for row in self._entries for p in row if not p.is_zero()), default=0)

    def is_zero(self) -> bool:
        return all(p.is_zero() for row in self._entries for p in row)

    def monomials(self) -> List[Monomial]:
        found = {m for row in self._entries for p in row for m in p.monomials()}
        return sort_monomials(found)

    def coefficient_matrices(self) -> Dict[Monomial, np.ndarray]:
        """拆成 單項式 → 數值係數矩陣"""
        result: Dict[Monomial, np.ndarray] = {}
        for i, row in enumerate(self._entries):
            for j, p in enumerate(row):
                for mono, coef in p.terms():
                    if mono not in result:
                        result[mono] = np.zeros((self.rows, self.cols))
                    result[mono][i, j] = coef
        return result

    def transpose(self) -> 'PolyMatrix':
        return PolyMatrix([[self._entries[i][j] for i in range(self.rows)] for j in range(self.cols)], self.nvars)

    @property
    def T(self) -> 'PolyMatrix':
        return self.transpose()

    def _check_same_shape(self, other: 'PolyMatrix'):
        if self.shape != other.shape or self.nvars != other.nvars:
            raise DimensionMismatch(f"矩陣維度不符: {self.shape} vs {other.shape}")

    def __add__(self, other: 'PolyMatrix') -> 'PolyMatrix':
        self._check_same_shape(other)
        return PolyMatrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self._entries, other._entries)],
                          self.nvars)

    def __sub__(self, other: 'PolyMatrix') -> 'PolyMatrix':
        self._check_same_shape(other)
        return PolyMatrix([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self._entries, other._entries)],
                          self.nvars)

    def __neg__(self) -> 'PolyMatrix':
        return self.scale(-1.0)

    def scale(self, factor: float) -> 'PolyMatrix':
        return PolyMatrix([[p.scale(factor) for p in row] for row in self._entries], self.nvars)

    def __mul__(self, factor) -> 'PolyMatrix':
        if isinstance(factor, Polynomial):
            return PolyMatrix([[p * factor for p in row] for row in self._entries], self.nvars)
        return self.scale(float(factor))

    __rmul__ = __mul__

    def left_multiply(self, array) -> 'PolyMatrix':
        """數值矩陣 A 左乘：A @ self"""
        arr = np.atleast_2d(np.asarray(array, dtype=float))
        if arr.shape[1] != self.rows:
            raise DimensionMismatch(f"無法相乘: {arr.shape} @ {self.shape}")
        coefs = {m: arr @ c for m, c in self.coefficient_matrices().items()}
        return PolyMatrix.from_coefficient_matrices(coefs, arr.shape[0], self.cols, self.nvars)

    def right_multiply(self, array) -> 'PolyMatrix':
        """數值矩陣 A 右乘：self @ A"""
        arr = np.atleast_2d(np.asarray(array, dtype=float))
        if arr.shape[0] != self.cols:
            raise DimensionMismatch(f"無法相乘: {self.shape} @ {arr.shape}")
        coefs = {m: c @ arr for m, c in self.coefficient_matrices().items()}
        return PolyMatrix.from_coefficient_matrices(coefs, self.rows, arr.shape[1], self.nvars)

    def __matmul__(self, other) -> 'PolyMatrix':
        if not isinstance(other, PolyMatrix):
            return self.right_multiply(other)
        if self.cols != other.rows or self.nvars != other.nvars:
            raise DimensionMismatch(f"無法相乘: {self.shape} @ {other.shape}")
        grid = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = Polynomial.zero(self.nvars)
                for k in range(self.cols):
                    a = self._entries[i][k]
                    b = other._entries[k][j]
                    if not a.is_zero() and not b.is_zero():
                        acc = acc + a * b
                row.append(acc)
            grid.append(row)
        return PolyMatrix(grid, self.nvars)

    def __rmatmul__(self, other) -> 'PolyMatrix':
        return self.left_multiply(other)

    def evaluate(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != self.nvars:
            raise DimensionMismatch(f"輸入維度 {arr.shape} 與變數個數 {self.nvars} 不符")
        return np.array([[p.evaluate(arr) for p in row] for row in self._entries], dtype=float).reshape(
            self.rows, self.cols)

    __call__ = evaluate

    def to_json(self) -> List[List[List[dict]]]:
        return [[p.to_json() for p in row] for row in self._entries]

    @classmethod
    def from_json(cls, nvars: int, data) -> 'PolyMatrix':
        return cls([[Polynomial.from_json(nvars, cell) for cell in row] for row in data], nvars)

    def __repr__(self) -> str:
        return f"PolyMatrix({self.rows}x{self.cols}, nvars={self.nvars})"


class Dictionary:
    """單項式字典；R 字典不含常數項，G 字典可含常數項"""

    R = 'R'
    G = 'G'

    __slots__ = ('monomials', 'kind', 'nvars')

    def __init__(self, monomials: Sequence[Monomial], kind: str = 'R', nvars: Optional[int] = None):
        monos = tuple(monomials)
        if nvars is None:
            if not monos:
                raise ValueError("空字典必須指定 nvars")
            nvars = monos[0].nvars
        if kind not in (self.R, self.G):
            raise ValueError(f"未知的字典類型: {kind}")
        if any(m.nvars != nvars for m in monos):
            raise DimensionMismatch("字典中的單項式變數個數不一致")
        if len(set(monos)) != len(monos):
            raise ValueError("字典中有重複的單項式")
        if kind == self.R and any(m.degree == 0 for m in monos):
            raise FactorError("R 字典不可包含常數單項式")
        self.monomials = monos
        self.kind = kind
        self.nvars = int(nvars)

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.monomials)

    def __getitem__(self, i: int) -> Monomial:
        return self.monomials[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Dictionary) and self.monomials == other.monomials and self.kind == other.kind

    def __hash__(self):
        return hash((self.monomials, self.kind))

    def index(self, mono: Monomial) -> int:
        return self.monomials.index(mono)

    @property
    def max_degree(self) -> int:
        return max((m.degree for m in self.monomials), default=0)

    def exponent_matrix(self) -> np.ndarray:
        return np.array([m.exponents for m in self.monomials], dtype=float).reshape(len(self), self.nvars)

    def evaluate(self, x) -> np.ndarray:
        """字典在單點的值，回傳長度 N 的向量"""
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.nvars,):
            raise DimensionMismatch(f"輸入維度 {arr.shape} 與變數個數 {self.nvars} 不符")
        return np.prod(arr[None, :] ** self.exponent_matrix(), axis=1)

    def evaluate_columns(self, states: np.ndarray) -> np.ndarray:
        """states 為 n×T，回傳 N×T 矩陣（每行為一個時間點的字典值）"""
        states = np.asarray(states, dtype=float)
        if states.shape[0] != self.nvars:
            raise DimensionMismatch(f"狀態矩陣列數 {states.shape[0]} 與變數個數 {self.nvars} 不符")
        exps = self.exponent_matrix()
        return np.prod(states.T[None, :, :] ** exps[:, None, :], axis=2)

    def to_json(self) -> List[List[int]]:
        return [m.to_json() for m in self.monomials]

    @classmethod
    def from_json(cls, data: Iterable[Sequence[int]], kind: str = 'R', nvars: Optional[int] = None) -> 'Dictionary':
        return cls([Monomial(tuple(int(e) for e in exps)) for exps in data], kind, nvars)

    def __repr__(self) -> str:
        return f"Dictionary({self.kind}, [{', '.join(str(m) for m in self.monomials)}])"


def dictionary_size(n: int, max_degree: int, include_constant: bool) -> int:
    total = int(comb(n + max_degree, max_degree, exact=True))
    return total if include_constant else total - 1


def build_dictionary(n: int, max_degree: int, include_constant: bool = False) -> Dictionary:
    """建立總次數不超過 max_degree 的所有單項式

    Args:
        n: 狀態維度
        max_degree: 最大總次數
        include_constant: 是否包含常數單項式（G 字典）

    Returns:
        Dictionary: 依分級字典序排列的字典
    """
    if n < 1:
        raise ValueError(f"狀態維度必須 ≥ 1: {n}")
    if max_degree < 1 and not (include_constant and max_degree == 0):
        raise ValueError(f"最大次數必須 ≥ 1: {max_degree}")
    low = 0 if include_constant else 1
    monos = [Monomial(exps) for exps in itertools.product(range(max_degree + 1), repeat=n)
             if low <= sum(exps) <= max_degree]
    monos = sort_monomials(monos)
    kind = Dictionary.G if include_constant else Dictionary.R
    result = Dictionary(monos, kind, n)
    expected = dictionary_size(n, max_degree, include_constant)
    if len(result) != expected:
        raise RuntimeError(f"字典大小 {len(result)} 與預期 {expected} 不符")
    logger.debug(f"建立字典: n={n}, d={max_degree}, 常數項={include_constant}, 大小={len(result)}")
    return result


def factor_dictionary(dictionary: Dictionary) -> PolyMatrix:
    """建立 N×n 轉換矩陣 L(x)，使 R(x) = L(x) x

    每列只有一個非零元素：取次方為正的最小變數索引 j*，
    該位置放入次方減一後的單項式。
    """
    n = dictionary.nvars
    grid = [[Polynomial.zero(n) for _ in range(n)] for _ in range(len(dictionary))]
    for i, mono in enumerate(dictionary):
        if mono.degree == 0:
            raise FactorError(f"第 {i} 個單項式為常數，無法分解")
        j = next(k for k, e in enumerate(mono.exponents) if e > 0)
        grid[i][j] = Polynomial.from_monomial(mono / Monomial.variable(n, j))
    return PolyMatrix(grid, n)


def input_matrix(g_dictionary: Dictionary, m: int) -> PolyMatrix:
    """由 G 字典 g(x) 建立 G(x) = I_m ⊗ g(x)，大小為 (m·|g|)×m"""
    size = len(g_dictionary)
    n = g_dictionary.nvars
    grid = [[Polynomial.zero(n) for _ in range(m)] for _ in range(m * size)]
    for i in range(m):
        for a, mono in enumerate(g_dictionary):
            grid[i * size + a][i] = Polynomial.from_monomial(mono)
    return PolyMatrix(grid, n)


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def poly_scale(p: Polynomial, factor: float) -> Polynomial:
    return p.scale(factor)


def poly_eval(p: Polynomial, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.nvars,):
        raise DimensionMismatch(f"輸入維度 {x.shape} 與變數個數 {p.nvars} 不符")
    return p.evaluate(x)


def polymat_eval(matrix: PolyMatrix, x: Sequence[float]) -> np.ndarray:
    return matrix.evaluate(x)


def polyvector(polys: Sequence[Polynomial]) -> PolyMatrix:
    """多項式串列 → 行向量 PolyMatrix"""
    polys = list(polys)
    return PolyMatrix([[p] for p in polys], polys[0].nvars if polys else None)
