import copy
import logging
import os
from typing import Optional

import yaml

logger = logging.getLogger('Settings')

# 設定檔缺少時使用的預設值
DEFAULT_SETTINGS = {
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        'directory': 'logs',
        'to_file': False,
        'color': True,
    },
    'solver': {
        'tol': 1.0e-7,
        'max_iter': 200,
        'reg_init': 1.0e-9,
        'reg_max': 1.0e-5,
        'step_fraction': 0.98,
        'chunk_size': 256,
    },
    'synthesis': {
        'eps_pd': 1.0e-3,
        'alpha_min': 1.0e-9,
        'objective': 'trace',
        'workers': 1,
    },
    'verification': {
        'samples': 10000,
        'grid_per_axis': 21,
        'violation_tol': 1.0e-6,
        'level_rel_tol': 1.0e-6,
    },
    'simulation': {
        'workers': 1,
    },
}


def _candidate_paths() -> list:
    return [
        'config/config.yaml',  # 相對於當前目錄
        os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), 'config', 'config.yaml'),  # 套件目錄
    ]


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(path: Optional[str] = None) -> dict:
    """載入 YAML 設定檔並與預設值合併

    Args:
        path: 指定設定檔路徑；None 時依序搜尋候選路徑

    Returns:
        dict: 合併後的設定
    """
    paths = [path] if path else _candidate_paths()
    logger.debug(f"搜尋設定檔路徑: {paths}")
    for candidate in paths:
        if candidate and os.path.exists(candidate):
            with open(candidate, 'r', encoding='utf-8') as f:
                content = yaml.safe_load(f) or {}
            if not isinstance(content, dict):
                logger.error(f"設定檔格式錯誤: {candidate}")
                continue
            logger.debug(f"找到設定檔: {candidate}")
            return _merge(DEFAULT_SETTINGS, content)
    logger.warning("找不到設定檔，使用預設值")
    return copy.deepcopy(DEFAULT_SETTINGS)
