import logging

import numpy as np

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# Error Codes
ERROR_INVALID_DIMENSION = "INVALID_DIMENSION"
ERROR_INVALID_TUPLE = "INVALID_TUPLE"
ERROR_INVALID_ARGUMENT = "INVALID_ARGUMENT"
ERROR_DIMENSION_MISMATCH = "DIMENSION_MISMATCH"
ERROR_NO_OVERLAP = "NO_OVERLAP"
ERROR_DEGENERATE_STATE = "DEGENERATE_STATE"
ERROR_CONFIG = "CONFIG_ERROR"
ERROR_NUMERICAL_FAILURE = "NUMERICAL_FAILURE"
ERROR_FILE_FORMAT = "FILE_FORMAT"

# CLI 終了コード
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class SlaterForgeError(ValueError):
    """全てのエラーの基底クラス。code にエラーコードを保持する"""

    code = ERROR_INVALID_ARGUMENT

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        """status / message / code を持つエラー応答の辞書を返す"""
        return {"status": "error", "message": self.message, "code": self.code}


class InvalidDimensionError(SlaterForgeError):
    code = ERROR_INVALID_DIMENSION


class InvalidTupleError(SlaterForgeError):
    code = ERROR_INVALID_TUPLE


class InvalidArgumentError(SlaterForgeError):
    code = ERROR_INVALID_ARGUMENT


class DimensionMismatchError(SlaterForgeError):
    code = ERROR_DIMENSION_MISMATCH


class NoOverlapError(SlaterForgeError):
    code = ERROR_NO_OVERLAP


class DegenerateStateError(SlaterForgeError):
    code = ERROR_DEGENERATE_STATE


class ConfigError(SlaterForgeError):
    code = ERROR_CONFIG


class NumericalError(SlaterForgeError):
    code = ERROR_NUMERICAL_FAILURE


class FileFormatError(SlaterForgeError):
    code = ERROR_FILE_FORMAT


def exit_code_for(error: Exception) -> int:
    """例外を CLI の終了コードに変換する"""
    if isinstance(error, (ConfigError, FileFormatError)):
        return EXIT_CONFIG_ERROR
    if isinstance(error, (NumericalError, NoOverlapError, DegenerateStateError)):
        return EXIT_NUMERICAL_FAILURE
    if isinstance(error, np.linalg.LinAlgError):
        return EXIT_NUMERICAL_FAILURE
    if isinstance(error, SlaterForgeError):
        return EXIT_CONFIG_ERROR
    return EXIT_NUMERICAL_FAILURE
