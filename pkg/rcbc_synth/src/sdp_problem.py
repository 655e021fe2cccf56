"""
標準錐形式的半正定規劃

    minimize    ⟨C, X⟩ + dᵀz
    subject to  ⟨A_k, X⟩ + F_k z = b_k,   k = 1..m
                X = diag(X_1, ..., X_p) ⪰ 0,  z 自由變數

A_k 與 C 以 SDPA 語意的三元組 (區塊, i ≤ j, 值) 儲存：值 v 代表
矩陣的 (i, j) 與 (j, i) 兩個位置都是 v。
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch

logger = logging.getLogger('SdpProblem')


@dataclass
class SdpProblem:
    block_sizes: List[int]
    block_names: List[str]
    # 約束矩陣三元組
    con_index: np.ndarray
    con_block: np.ndarray
    con_row: np.ndarray
    con_col: np.ndarray
    con_value: np.ndarray
    free_matrix: sp.csr_matrix
    rhs: np.ndarray
    # 目標函數
    obj_block: np.ndarray
    obj_row: np.ndarray
    obj_col: np.ndarray
    obj_value: np.ndarray
    free_cost: np.ndarray
    free_names: List[str] = field(default_factory=list)
    symbols: Dict[str, tuple] = field(default_factory=dict)

    @property
    def num_constraints(self) -> int:
        return int(self.rhs.shape[0])

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def num_free(self) -> int:
        return int(self.free_cost.shape[0])

    def is_empty(self) -> bool:
        return self.num_blocks == 0 and self.num_constraints == 0 and self.num_free == 0

    def block_index(self, name: str) -> int:
        return self.block_names.index(name)

    def free_slice(self, name: str) -> slice:
        kind, start, count = self.symbols[name][:3]
        if kind != 'free':
            raise KeyError(f"{name} 不是自由變數群組")
        return slice(start, start + count)

    # ---- 線性算子 ----
    def _block_mask(self, blk: int) -> np.ndarray:
        return self.con_block == blk

    def apply(self, blocks: Sequence[np.ndarray], free: Optional[np.ndarray] = None) -> np.ndarray:
        """𝒜(X) + F z"""
        m = self.num_constraints
        out = np.zeros(m)
        for blk, X in enumerate(blocks):
            mask = self._block_mask(blk)
            if not mask.any():
                continue
            i, j, v = self.con_row[mask], self.con_col[mask], self.con_value[mask]
            weights = np.where(i == j, 1.0, 2.0) * v * X[i, j]
            out += np.bincount(self.con_index[mask], weights=weights, minlength=m)
        if free is not None and self.num_free:
            out += self.free_matrix @ free
        return out

    def adjoint(self, y: np.ndarray) -> List[np.ndarray]:
        """𝒜*(y) = Σ y_k A_k，逐區塊回傳"""
        result = []
        for blk, size in enumerate(self.block_sizes):
            mask = self._block_mask(blk)
            upper = np.zeros((size, size))
            if mask.any():
                np.add.at(upper, (self.con_row[mask], self.con_col[mask]),
                          self.con_value[mask] * y[self.con_index[mask]])
            result.append(upper + upper.T - np.diag(np.diag(upper)))
        return result

    def free_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Fᵀ y"""
        if not self.num_free:
            return np.zeros(0)
        return self.free_matrix.T @ y

    def objective_blocks(self) -> List[np.ndarray]:
        result = []
        for blk, size in enumerate(self.block_sizes):
            upper = np.zeros((size, size))
            mask = self.obj_block == blk
            if mask.any():
                np.add.at(upper, (self.obj_row[mask], self.obj_col[mask]), self.obj_value[mask])
            result.append(upper + upper.T - np.diag(np.diag(upper)))
        return result

    def objective(self, blocks: Sequence[np.ndarray], free: Optional[np.ndarray] = None) -> float:
        value = sum(float(np.sum(C * X)) for C, X in zip(self.objective_blocks(), blocks))
        if free is not None and self.num_free:
            value += float(self.free_cost @ free)
        return value

    def constraint_block_matrix(self, k: int, blk: int) -> np.ndarray:
        """第 k 個約束在區塊 blk 上的稠密對稱矩陣"""
        size = self.block_sizes[blk]
        upper = np.zeros((size, size))
        mask = (self.con_index == k) & (self.con_block == blk)
        np.add.at(upper, (self.con_row[mask], self.con_col[mask]), self.con_value[mask])
        return upper + upper.T - np.diag(np.diag(upper))

    def scaled(self, factor: float) -> 'SdpProblem':
        """所有約束資料（A_k、F_k、b）乘上 factor"""
        return SdpProblem(
            block_sizes=list(self.block_sizes), block_names=list(self.block_names),
            con_index=self.con_index.copy(), con_block=self.con_block.copy(),
            con_row=self.con_row.copy(), con_col=self.con_col.copy(), con_value=self.con_value * factor,
            free_matrix=(self.free_matrix * factor).tocsr(), rhs=self.rhs * factor,
            obj_block=self.obj_block.copy(), obj_row=self.obj_row.copy(), obj_col=self.obj_col.copy(),
            obj_value=self.obj_value.copy(), free_cost=self.free_cost.copy(),
            free_names=list(self.free_names), symbols=dict(self.symbols),
        )

    def summary(self) -> dict:
        return {
            'blocks': {name: size for name, size in zip(self.block_names, self.block_sizes)},
            'num_constraints': self.num_constraints,
            'num_free': self.num_free,
            'nonzeros': int(self.con_value.shape[0] + self.free_matrix.nnz),
        }


class SdpBuilder:
    """逐條累加約束，最後產生 SdpProblem"""

    def __init__(self):
        self.block_sizes: List[int] = []
        self.block_names: List[str] = []
        self.free_names: List[str] = []
        self.symbols: Dict[str, tuple] = {}
        self._rows: List[Tuple[Dict[Tuple[int, int, int], float], Dict[int, float], float]] = []
        self._objective: Dict[Tuple[int, int, int], float] = {}
        self._free_cost: Dict[int, float] = {}

    def add_block(self, name: str, size: int) -> int:
        if size < 1:
            raise DimensionMismatch(f"區塊 {name} 的大小必須 ≥ 1: {size}")
        if name in self.symbols:
            raise ValueError(f"名稱重複: {name}")
        self.block_sizes.append(int(size))
        self.block_names.append(name)
        self.symbols[name] = ('block', len(self.block_sizes) - 1)
        return len(self.block_sizes) - 1

    def add_free(self, name: str, labels: Sequence[str]) -> int:
        """新增一組自由變數，回傳第一個變數的索引"""
        if name in self.symbols:
            raise ValueError(f"名稱重複: {name}")
        start = len(self.free_names)
        self.free_names.extend(f"{name}[{label}]" for label in labels)
        self.symbols[name] = ('free', start, len(labels))
        return start

    @property
    def num_free(self) -> int:
        return len(self.free_names)

    @staticmethod
    def _accumulate(target: Dict[Tuple[int, int, int], float], terms: Iterable[Tuple[int, int, int, float]]):
        # 線性泛函 Σ c·X[p,q]；非對角項由 (p,q) 與 (q,p) 兩個位置各分一半
        for blk, p, q, coef in terms:
            if coef == 0.0:
                continue
            key = (blk, p, q) if p <= q else (blk, q, p)
            target[key] = target.get(key, 0.0) + (coef if p == q else 0.5 * coef)

    def add_equality(self, matrix_terms: Iterable[Tuple[int, int, int, float]],
                     free_terms: Iterable[Tuple[int, float]], rhs: float) -> int:
        """Σ c·X_blk[p,q] + Σ f·z_i = rhs

        Args:
            matrix_terms: (區塊, p, q, c)，(p,q) 與 (q,p) 可分開出現並會被累加
            free_terms: (自由變數索引, 係數)
            rhs: 右手邊

        Returns:
            int: 約束索引
        """
        entries: Dict[Tuple[int, int, int], float] = {}
        self._accumulate(entries, matrix_terms)
        free: Dict[int, float] = {}
        for idx, coef in free_terms:
            if coef != 0.0:
                free[idx] = free.get(idx, 0.0) + coef
        self._rows.append((entries, free, float(rhs)))
        return len(self._rows) - 1

    def add_objective(self, matrix_terms: Iterable[Tuple[int, int, int, float]] = (),
                      free_terms: Iterable[Tuple[int, float]] = ()):
        self._accumulate(self._objective, matrix_terms)
        for idx, coef in free_terms:
            self._free_cost[idx] = self._free_cost.get(idx, 0.0) + coef

    @property
    def num_constraints(self) -> int:
        return len(self._rows)

    def build(self) -> SdpProblem:
        con_index, con_block, con_row, con_col, con_value = [], [], [], [], []
        free_rows, free_cols, free_vals = [], [], []
        rhs = np.zeros(len(self._rows))
        for k, (entries, free, b) in enumerate(self._rows):
            for (blk, i, j), v in entries.items():
                if v != 0.0:
                    con_index.append(k)
                    con_block.append(blk)
                    con_row.append(i)
                    con_col.append(j)
                    con_value.append(v)
            for idx, v in free.items():
                free_rows.append(k)
                free_cols.append(idx)
                free_vals.append(v)
            rhs[k] = b
        free_matrix = sp.csr_matrix((free_vals, (free_rows, free_cols)), shape=(len(self._rows), self.num_free))
        obj_items = [(key, v) for key, v in self._objective.items() if v != 0.0]
        free_cost = np.zeros(self.num_free)
        for idx, v in self._free_cost.items():
            free_cost[idx] = v
        problem = SdpProblem(
            block_sizes=list(self.block_sizes),
            block_names=list(self.block_names),
            con_index=np.array(con_index, dtype=np.int64),
            con_block=np.array(con_block, dtype=np.int64),
            con_row=np.array(con_row, dtype=np.int64),
            con_col=np.array(con_col, dtype=np.int64),
            con_value=np.array(con_value, dtype=float),
            free_matrix=free_matrix,
            rhs=rhs,
            obj_block=np.array([key[0] for key, _ in obj_items], dtype=np.int64),
            obj_row=np.array([key[1] for key, _ in obj_items], dtype=np.int64),
            obj_col=np.array([key[2] for key, _ in obj_items], dtype=np.int64),
            obj_value=np.array([v for _, v in obj_items], dtype=float),
            free_cost=free_cost,
            free_names=list(self.free_names),
            symbols=dict(self.symbols),
        )
        logger.debug(f"建立 SDP: {problem.summary()}")
        return problem
