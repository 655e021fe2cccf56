"""
執行設定（JSON）的讀取與驗證
"""
import copy
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, RankError, RcbcError, RegionError
from .plant import DisturbanceSpec, ExcitationSpec, GroundTruthSystem
from .polynomial import Dictionary, build_dictionary
from .regions import INITIAL, STATE, UNSAFE, Region, check_disjoint

logger = logging.getLogger('RunConfig')

DEFAULT_DEGREES = {'deg_H': None, 'deg_alpha': 0, 'deg_varpi': None, 'gram_degree': None}
DEFAULT_SEEDS = {'data': 0, 'verify': 1, 'simulate': 2}
DEFAULT_SIMULATION = {'num_runs': 50, 'K': 200, 'x0_mode': 'uniform', 'w_mode': 'uniform-ball'}


def _dictionary(spec: Dict[str, Any], kind: str, n: int) -> Dictionary:
    """{"max_degree": d} 或 {"monomials": [[e1, ..., en], ...]}"""
    if 'monomials' in spec:
        return Dictionary.from_json(spec['monomials'], kind, n)
    if 'max_degree' in spec:
        return build_dictionary(n, int(spec['max_degree']), include_constant=(kind == Dictionary.G))
    raise ConfigError(f"字典設定需要 max_degree 或 monomials: {spec}")


@dataclass
class RunConfig:
    name: str
    state: Region
    initial: Region
    unsafe: Region
    r_dictionary: Dictionary
    g_dictionary: Dictionary
    delta: float
    T: int
    m: int
    plant: Optional[Dict[str, Any]] = None
    excitation: Optional[ExcitationSpec] = None
    x0: Optional[List[float]] = None
    lambda_grid: List[float] = field(default_factory=lambda: [0.99, 0.95, 0.9])
    pi_grid: List[float] = field(default_factory=lambda: [1.0e-5, 1.0e-3, 0.1, 1.15])
    degrees: Dict[str, Optional[int]] = field(default_factory=lambda: dict(DEFAULT_DEGREES))
    solver: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SEEDS))
    simulation: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_SIMULATION))
    output_dir: str = 'output'
    workers: int = 1
    test_artifacts: bool = False
    sos_level_sets: bool = False
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.state.dim

    @property
    def N(self) -> int:
        return len(self.r_dictionary)

    @property
    def disturbance(self) -> DisturbanceSpec:
        return DisturbanceSpec(self.delta)

    def system(self) -> GroundTruthSystem:
        """真實系統只在資料收集、驗證與模擬時建立"""
        if not self.plant:
            raise ConfigError("設定中沒有 plant 區段，無法模擬系統")
        sys = GroundTruthSystem.from_config(self.plant)
        if sys.n != self.n or sys.m != self.m:
            raise DimensionMismatch(f"plant 維度 (n={sys.n}, m={sys.m}) 與設定 (n={self.n}, m={self.m}) 不符")
        return sys

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        try:
            regions = data['regions']
            state = Region.from_json(regions[STATE], STATE, 'X')
            initial = Region.from_json(regions[INITIAL], INITIAL, 'X0')
            unsafe = Region.from_json(regions[UNSAFE], UNSAFE, 'X1')
            n = state.dim
            dictionaries = data.get('dictionaries', {})
            r_dictionary = _dictionary(dictionaries.get('r', {'max_degree': 2}), Dictionary.R, n)
            g_dictionary = _dictionary(dictionaries.get('g', {'max_degree': 0}), Dictionary.G, n)
            m = int(data['m'])
            excitation = ExcitationSpec.from_json(data['excitation']) if data.get('excitation') else None
            grid = data.get('grid', {})
            config = cls(
                name=data.get('name', 'run'),
                state=state, initial=initial, unsafe=unsafe,
                r_dictionary=r_dictionary, g_dictionary=g_dictionary,
                delta=float(data['delta']), T=int(data['T']), m=m,
                plant=data.get('plant'),
                excitation=excitation,
                x0=[float(v) for v in data['x0']] if data.get('x0') is not None else None,
                lambda_grid=[float(v) for v in grid.get('lambda', [0.99, 0.95, 0.9])],
                pi_grid=[float(v) for v in grid.get('pi', [1.0e-5, 1.0e-3, 0.1, 1.15])],
                degrees={**DEFAULT_DEGREES, **data.get('degrees', {})},
                solver=dict(data.get('solver', {})),
                seeds={**DEFAULT_SEEDS, **data.get('seeds', {})},
                simulation={**DEFAULT_SIMULATION, **data.get('simulation', {})},
                output_dir=data.get('output_dir', 'output'),
                workers=int(data.get('workers', 1)),
                test_artifacts=bool(data.get('test_artifacts', False)),
                sos_level_sets=bool(data.get('sos_level_sets', False)),
                raw=copy.deepcopy(data),
            )
        except RcbcError:
            raise
        except KeyError as e:
            raise ConfigError(f"設定缺少欄位: {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"設定格式錯誤: {e}") from e
        config.validate()
        return config

    @classmethod
    def load(cls, path: str) -> 'RunConfig':
        if not os.path.exists(path):
            raise ConfigError(f"找不到設定檔: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"設定檔不是合法的 JSON: {path} ({e})") from e
        # manifest.json 內嵌的設定也可直接使用
        if 'regions' not in data and isinstance(data.get('config'), dict):
            data = data['config']
        config = cls.from_dict(data)
        logger.info(f"已載入執行設定 {path}: n={config.n}, m={config.m}, N={config.N}, T={config.T}, δ={config.delta}")
        return config

    def validate(self):
        """在任何計算之前檢查設定

        Raises:
            RegionError: X 不是單一盒子、X0 與 X1 相交、或 X0/X1 不在 X 內
            RankError: T ≤ N
            ConfigError: 其他數值設定錯誤
        """
        if not self.state.is_single_box:
            raise RegionError("狀態集 X 必須是單一盒子")
        for region in (self.initial, self.unsafe):
            if region.dim != self.n:
                raise DimensionMismatch(f"區域 {region.name} 維度 {region.dim} 與 X 維度 {self.n} 不符")
        check_disjoint(self.initial, self.unsafe)
        if not self.initial.is_subset_of(self.state):
            raise RegionError("X0 必須包含於 X")
        if not self.unsafe.is_subset_of(self.state):
            raise RegionError("X1 必須包含於 X")
        if self.T <= self.N:
            raise RankError(f"樣本數 T={self.T} 必須大於 R 字典大小 N={self.N}")
        if not self.delta >= 0:
            raise ConfigError(f"delta 必須 ≥ 0: {self.delta}")
        if self.m < 1:
            raise ConfigError(f"輸入數 m 必須 ≥ 1: {self.m}")
        if self.excitation is not None and self.excitation.m != self.m:
            raise DimensionMismatch(f"激勵訊號維度 {self.excitation.m} 與 m={self.m} 不符")
        if self.x0 is not None and len(self.x0) != self.n:
            raise DimensionMismatch(f"x0 維度 {len(self.x0)} 與 n={self.n} 不符")
        if not self.lambda_grid or any(not 0.0 < lam <= 1.0 for lam in self.lambda_grid):
            raise ConfigError(f"λ 格點必須在 (0, 1]: {self.lambda_grid}")
        if not self.pi_grid or any(not pi > 0.0 for pi in self.pi_grid):
            raise ConfigError(f"π 格點必須 > 0: {self.pi_grid}")
        if self.workers < 1:
            raise ConfigError(f"workers 必須 ≥ 1: {self.workers}")

    def apply_overrides(self, T: Optional[int] = None, delta: Optional[float] = None, seed: Optional[int] = None,
                        output_dir: Optional[str] = None, workers: Optional[int] = None,
                        test_artifacts: Optional[bool] = None, sos_level_sets: Optional[bool] = None) -> 'RunConfig':
        """命令列參數覆寫設定值，覆寫後重新驗證"""
        if T is not None:
            self.T = int(T)
        if delta is not None:
            self.delta = float(delta)
        if seed is not None:
            self.seeds = {key: int(seed) + offset for offset, key in enumerate(sorted(DEFAULT_SEEDS))}
        if output_dir is not None:
            self.output_dir = output_dir
        if workers is not None:
            self.workers = int(workers)
        if test_artifacts:
            self.test_artifacts = True
        if sos_level_sets:
            self.sos_level_sets = True
        self.validate()
        return self

    def initial_state(self) -> np.ndarray:
        """資料收集的初始狀態；未設定時以資料種子在 X0 內均勻取樣"""
        if self.x0 is not None:
            return np.array(self.x0, dtype=float)
        return self.initial.sample(np.random.default_rng(self.seeds['data']), 1)[0]

    def excitation_spec(self) -> ExcitationSpec:
        return self.excitation if self.excitation is not None else ExcitationSpec.symmetric(1.0, self.m)

    def to_json(self) -> Dict[str, Any]:
        """回傳可重現本次執行的完整設定（寫入 manifest）"""
        return {
            'name': self.name,
            'plant': self.plant,
            'm': self.m,
            'regions': {
                STATE: self.state.to_json(),
                INITIAL: self.initial.to_json(),
                UNSAFE: self.unsafe.to_json(),
            },
            'dictionaries': {
                'r': {'monomials': self.r_dictionary.to_json()},
                'g': {'monomials': self.g_dictionary.to_json()},
            },
            'delta': self.delta,
            'T': self.T,
            'excitation': self.excitation_spec().to_json(),
            'x0': self.initial_state().tolist(),
            'grid': {'lambda': self.lambda_grid, 'pi': self.pi_grid},
            'degrees': self.degrees,
            'solver': self.solver,
            'seeds': self.seeds,
            'simulation': self.simulation,
            'output_dir': self.output_dir,
            'workers': self.workers,
            'test_artifacts': self.test_artifacts,
            'sos_level_sets': self.sos_level_sets,
        }
