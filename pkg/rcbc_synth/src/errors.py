"""
例外類別與命令列結束碼
"""
from typing import List, Optional

# 結束碼
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_SYNTHESIS = 3
EXIT_VIOLATION = 4


class RcbcError(Exception):
    """所有 rcbc_synth 例外的基底類別"""
    exit_code = EXIT_UNEXPECTED


class DimensionMismatch(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class FactorError(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class DegreeError(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class RankError(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class RegionError(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class DegenerateBox(RegionError):
    pass


class EmptyRegion(RegionError):
    pass


class ConfigError(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class BasisTooSmall(RcbcError, ValueError):
    exit_code = EXIT_VALIDATION


class ParseError(RcbcError, ValueError):
    """SDPA 檔案格式錯誤，附帶行號"""
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, line_number: int):
        super().__init__(f"第 {line_number} 行: {message}")
        self.line_number = line_number


class RankRetryExhausted(RcbcError, RuntimeError):
    exit_code = EXIT_SYNTHESIS


class NumericalFailure(RcbcError, RuntimeError):
    """內點法數值失敗；solution 保留最後一個迭代點"""
    exit_code = EXIT_SYNTHESIS

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


class NotPositiveDefinite(RcbcError, RuntimeError):
    exit_code = EXIT_SYNTHESIS


class LevelGapFailure(RcbcError, RuntimeError):
    exit_code = EXIT_SYNTHESIS


class SynthesisFailed(RcbcError, RuntimeError):
    """整個 λ/π 網格都失敗時拋出，attempts 記錄每個網格點的失敗原因"""
    exit_code = EXIT_SYNTHESIS

    def __init__(self, message: str, attempts: Optional[List[dict]] = None):
        super().__init__(message)
        self.attempts = attempts or []
