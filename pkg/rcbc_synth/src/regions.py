"""
軸對齊盒狀區域（狀態集 X、初始集 X0、不安全集 X1）
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DegenerateBox, DimensionMismatch, EmptyRegion, RegionError
from .polynomial import PolyMatrix, Polynomial, polyvector

logger = logging.getLogger('Region')

STATE = 'state'
INITIAL = 'initial'
UNSAFE = 'unsafe'
ROLES = (STATE, INITIAL, UNSAFE)


@dataclass(frozen=True)
class Box:
    """[lower_i, upper_i] 的直積"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DimensionMismatch(f"盒子上下界長度不符: {len(self.lower)} != {len(self.upper)}")
        for i, (a, b) in enumerate(zip(self.lower, self.upper)):
            if not a < b:
                raise DegenerateBox(f"第 {i + 1} 軸退化: [{a}, {b}]")

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> 'Box':
        """bounds 為 [[a1, b1], [a2, b2], ...]"""
        try:
            lower = tuple(float(pair[0]) for pair in bounds)
            upper = tuple(float(pair[1]) for pair in bounds)
        except (TypeError, IndexError) as e:
            raise RegionError(f"盒子格式錯誤: {bounds}") from e
        return cls(lower, upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return np.array(self.upper)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        """單點回傳 bool，批次 (k, n) 回傳布林陣列"""
        arr = np.asarray(x, dtype=float)
        inside = np.all((arr >= self.lower_array - tol) & (arr <= self.upper_array + tol), axis=-1)
        return bool(inside) if arr.ndim == 1 else inside

    def intersects(self, other: 'Box') -> bool:
        if self.dim != other.dim:
            raise DimensionMismatch("盒子維度不符")
        return all(a1 <= b2 and a2 <= b1 for a1, b1, a2, b2 in zip(self.lower, self.upper, other.lower, other.upper))

    def is_subset_of(self, other: 'Box') -> bool:
        return all(a2 <= a1 and b1 <= b2 for a1, b1, a2, b2 in zip(self.lower, self.upper, other.lower, other.upper))

    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    def beta(self) -> List[Polynomial]:
        """β_i(x) = (x_i − a_i)(b_i − x_i)"""
        n = self.dim
        entries = []
        for i, (a, b) in enumerate(zip(self.lower, self.upper)):
            xi = Polynomial.variable(n, i)
            entries.append((xi - a) * (b - xi))
        return entries

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower_array, self.upper_array, size=(count, self.dim))

    def grid(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(a, b, per_axis) for a, b in zip(self.lower, self.upper)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def to_json(self) -> List[List[float]]:
        return [[a, b] for a, b in zip(self.lower, self.upper)]


@dataclass(frozen=True)
class Region:
    """盒子的聯集，附帶角色"""
    boxes: Tuple[Box, ...]
    role: str = STATE
    name: str = field(default='', compare=False)

    def __post_init__(self):
        if not self.boxes:
            raise EmptyRegion(f"區域 {self.name or self.role} 沒有任何盒子")
        if self.role not in ROLES:
            raise RegionError(f"未知的區域角色: {self.role}")
        dims = {box.dim for box in self.boxes}
        if len(dims) != 1:
            raise DimensionMismatch(f"區域內盒子維度不一致: {sorted(dims)}")

    @classmethod
    def from_json(cls, data, role: str, name: str = '') -> 'Region':
        """接受單一盒子 [[a,b],...] 或盒子串列 [[[a,b],...], ...]"""
        if not isinstance(data, (list, tuple)) or not data:
            raise EmptyRegion(f"區域 {name or role} 為空")
        first = data[0]
        if isinstance(first, (list, tuple)) and first and isinstance(first[0], (list, tuple)):
            boxes = tuple(Box.from_bounds(b) for b in data)
        else:
            boxes = (Box.from_bounds(data),)
        return cls(boxes, role, name)

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    @property
    def is_single_box(self) -> bool:
        return len(self.boxes) == 1

    def contains(self, x, tol: float = 0.0):
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.dim:
            raise DimensionMismatch(f"點的維度 {arr.shape[-1]} 與區域維度 {self.dim} 不符")
        inside = np.zeros(arr.shape[:-1], dtype=bool)
        for box in self.boxes:
            inside = inside | box.contains(arr, tol)
        return bool(inside) if arr.ndim == 1 else inside

    def intersects(self, other: 'Region') -> bool:
        return any(b1.intersects(b2) for b1 in self.boxes for b2 in other.boxes)

    def is_subset_of(self, other: 'Region') -> bool:
        """每個盒子都落在 other 的某一個盒子內（保守判斷）"""
        return all(any(b.is_subset_of(o) for o in other.boxes) for b in self.boxes)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """依體積比例在各盒子內均勻取樣"""
        volumes = np.array([np.prod(b.upper_array - b.lower_array) for b in self.boxes])
        picks = rng.choice(len(self.boxes), size=count, p=volumes / volumes.sum())
        points = np.empty((count, self.dim))
        for i, box in enumerate(self.boxes):
            mask = picks == i
            points[mask] = box.sample(rng, int(mask.sum()))
        return points

    def to_json(self):
        if self.is_single_box:
            return self.boxes[0].to_json()
        return [box.to_json() for box in self.boxes]


def region_beta(region: Region) -> PolyMatrix:
    """依序串接每個盒子的 β 項，回傳行向量

    Args:
        region: 區域

    Returns:
        PolyMatrix: (盒子數·n)×1 的多項式向量
    """
    entries: List[Polynomial] = []
    for box in region.boxes:
        entries.extend(box.beta())
    return polyvector(entries)


def check_disjoint(initial: Region, unsafe: Region):
    """X0 ∩ X1 必須為空"""
    for b0 in initial.boxes:
        for b1 in unsafe.boxes:
            if b0.intersects(b1):
                raise RegionError(f"初始集與不安全集相交: {b0.to_json()} ∩ {b1.to_json()}")
    logger.debug("初始集與不安全集不相交")
