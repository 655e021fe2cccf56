import copy
import json
import os

import pytest

from src.errors import ConfigError, DimensionMismatch, RankError, RegionError
from src.run_config import RunConfig

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'config')


def _academic_dict():
    with open(os.path.join(CONFIG_DIR, 'academic.json'), encoding='utf-8') as f:
        return json.load(f)


def test_load_academic_config():
    """測試讀入學術範例設定"""
    config = RunConfig.load(os.path.join(CONFIG_DIR, 'academic.json'))
    assert (config.n, config.m, config.N, config.T) == (2, 1, 9, 14)
    assert len(config.g_dictionary) == 10
    assert config.delta == 2e-4
    assert config.lambda_grid == [0.99, 0.95, 0.9]
    assert len(config.unsafe.boxes) == 3
    sys = config.system()
    assert sys.name == 'academic' and sys.n == 2


def test_load_lorenz_config():
    """測試讀入 Lorenz 範例設定"""
    config = RunConfig.load(os.path.join(CONFIG_DIR, 'lorenz.json'))
    assert config.n == 3
    assert config.system().name == 'lorenz'
    assert config.T > config.N


def test_overlapping_regions_rejected():
    """測試 X0 與 X1 相交時拒絕"""
    data = _academic_dict()
    data['regions']['unsafe'] = [[[0.5, 3], [0.5, 3]]]
    with pytest.raises(RegionError):
        RunConfig.from_dict(data)


def test_regions_outside_state_rejected():
    """測試 X1 不在 X 內、X 不是單一盒子"""
    data = _academic_dict()
    data['regions']['unsafe'] = [[[8, 12], [8, 12]]]
    with pytest.raises(RegionError):
        RunConfig.from_dict(data)
    data = _academic_dict()
    data['regions']['state'] = [[[-10, 0], [-10, 10]], [[0, 10], [-10, 10]]]
    with pytest.raises(RegionError):
        RunConfig.from_dict(data)


def test_too_few_samples_rejected():
    """測試 T ≤ N 時在任何計算之前拋出 RankError"""
    data = _academic_dict()
    data['T'] = 9
    with pytest.raises(RankError):
        RunConfig.from_dict(data)
    config = RunConfig.from_dict(_academic_dict())
    with pytest.raises(RankError):
        config.apply_overrides(T=5)


@pytest.mark.parametrize('key, value, error', [
    ('delta', -1.0, ConfigError),
    ('m', 0, ConfigError),
    ('x0', [0.1], DimensionMismatch),
    ('grid', {'lambda': [1.5]}, ConfigError),
    ('grid', {'pi': [0.0]}, ConfigError),
    ('workers', 0, ConfigError),
    ('T', 'many', ConfigError),
])
def test_invalid_values_rejected(key, value, error):
    """測試數值設定檢查"""
    data = _academic_dict()
    data[key] = value
    with pytest.raises(error):
        RunConfig.from_dict(data)


def test_missing_field_and_bad_file(tmp_path):
    """測試缺少欄位、不存在的檔案與非 JSON 檔案"""
    data = _academic_dict()
    del data['delta']
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / 'missing.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('{"name": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        RunConfig.load(str(bad))


def test_system_requires_plant():
    """測試沒有 plant 區段時無法建立真實系統，但設定仍可用於合成"""
    data = _academic_dict()
    del data['plant']
    config = RunConfig.from_dict(data)
    with pytest.raises(ConfigError):
        config.system()


def test_apply_overrides_seed_mapping():
    """測試 --seed 覆寫：data = s、simulate = s+1、verify = s+2"""
    config = RunConfig.from_dict(_academic_dict())
    config.apply_overrides(T=20, delta=1e-3, seed=10, workers=2, test_artifacts=True)
    assert config.seeds == {'data': 10, 'simulate': 11, 'verify': 12}
    assert config.T == 20 and config.delta == 1e-3 and config.workers == 2
    assert config.test_artifacts and not config.sos_level_sets


def test_explicit_monomial_dictionaries():
    """測試以單項式列表指定字典"""
    data = _academic_dict()
    data['dictionaries'] = {'r': {'monomials': [[1, 0], [0, 1], [2, 0]]}, 'g': {'monomials': [[0, 0]]}}
    data['T'] = 5
    config = RunConfig.from_dict(data)
    assert config.N == 3
    assert len(config.g_dictionary) == 1
    data['dictionaries'] = {'r': {'degree': 2}}
    with pytest.raises(ConfigError):
        RunConfig.from_dict(data)


def test_manifest_roundtrip(tmp_path):
    """測試 manifest 內嵌的完整設定可直接重新載入"""
    data = _academic_dict()
    del data['x0']
    config = RunConfig.from_dict(data)
    snapshot = config.to_json()
    assert snapshot['x0'] == config.initial_state().tolist()
    assert config.initial.contains(config.initial_state())
    path = tmp_path / 'manifest.json'
    path.write_text(json.dumps({'config': snapshot, 'status': 'ok'}), encoding='utf-8')
    reloaded = RunConfig.load(str(path))
    assert reloaded.to_json() == snapshot
    assert reloaded.r_dictionary.to_json() == config.r_dictionary.to_json()
    assert copy.deepcopy(reloaded.raw) == snapshot
