import os
import logging
from pathlib import Path

import numpy as np
from dotenv import load_dotenv, dotenv_values

from errors import ConfigError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# .envファイルから環境変数を読み込む
# .envファイルが存在しない場合は、この時点では何もしない
load_dotenv()

VERSION = "0.3.0"

# --- 実験設定ファイルで使えるキー ---
# 値の型: int / real / str / int_list / real_list / real_grid
EXPERIMENT_KEYS = {
    "kind": "str",
    "l": "int",
    "n": "int",
    "u": "real",
    "u_quench": "real",
    "l_i": "int_list",
    "u_list": "real_list",
    "t_grid": "real_grid",
    "m_list": "int_list",
    "l_range": "int_list",
    "restarts": "int",
    "max_sweeps": "int",
    "sweep_tolerance": "real",
    "seed": "int",
    "init": "str",
    "output_dir": "str",
    "wavefunction": "str",
    "workers": "int",
}


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"環境変数 {name} は整数である必要があります: {raw!r}")


def get_workers() -> int:
    """ブロック和とリスタートに使うスレッド数 (SLATER_FORGE_WORKERS)"""
    return max(1, _env_int("SLATER_FORGE_WORKERS", 1))


def get_block_size() -> int:
    """1ブロックあたりの基底行数 (SLATER_FORGE_BLOCK_SIZE)"""
    return max(1, _env_int("SLATER_FORGE_BLOCK_SIZE", 2048))


def get_output_dir() -> Path:
    return Path(os.getenv("SLATER_FORGE_OUTPUT_DIR", "results"))


def configure_logging():
    """SLATER_FORGE_LOG_LEVEL に従ってルートロガーのレベルを設定する"""
    level_name = os.getenv("SLATER_FORGE_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        logger.warning(f"不明なログレベル {level_name} です。INFO を使用します。")
        level = logging.INFO
    logging.getLogger().setLevel(level)


# --- 値のパース ---


def parse_int(value: str, key: str = "") -> int:
    try:
        return int(value.strip())
    except (ValueError, AttributeError):
        raise ConfigError(f"'{key}' は整数である必要があります: {value!r}")


def parse_real(value: str, key: str = "") -> float:
    try:
        return float(value.strip())
    except (ValueError, AttributeError):
        raise ConfigError(f"'{key}' は実数である必要があります: {value!r}")


def parse_int_list(value: str, key: str = "") -> list[int]:
    items = [item for item in value.split(",") if item.strip()]
    if not items:
        raise ConfigError(f"'{key}' が空です。")
    return [parse_int(item, key) for item in items]


def parse_real_list(value: str, key: str = "") -> list[float]:
    items = [item for item in value.split(",") if item.strip()]
    if not items:
        raise ConfigError(f"'{key}' が空です。")
    return [parse_real(item, key) for item in items]


def parse_real_grid(value: str, key: str = "") -> list[float]:
    """
    実数グリッドをパースする。
    "0,10,40" のようなカンマ区切りと、"0:100:1" (終端を含む) の両方を受け付ける。
    """
    grid = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            grid.append(parse_real(item, key))
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"'{key}' の範囲指定は start:stop:step の形式です: {item!r}")
        start, stop, step = (parse_real(p, key) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"'{key}' の範囲指定が不正です: {item!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        # 累積誤差を避けるため start + k*step で生成する
        grid.extend(float(start + k * step) for k in range(count))
    if not grid:
        raise ConfigError(f"'{key}' が空です。")
    return grid


_PARSERS = {
    "int": parse_int,
    "real": parse_real,
    "str": lambda value, key="": value.strip(),
    "int_list": parse_int_list,
    "real_list": parse_real_list,
    "real_grid": parse_real_grid,
}


def parse_experiment_values(raw: dict) -> dict:
    """KEY=VALUE の辞書を型付きの辞書に変換する。キーは大文字小文字を区別しない"""
    parsed = {}
    for key, value in raw.items():
        norm = key.strip().lower()
        if norm not in EXPERIMENT_KEYS:
            raise ConfigError(f"不明な設定キーです: {key}")
        if value is None:
            raise ConfigError(f"設定キー '{key}' に値がありません。")
        parsed[norm] = _PARSERS[EXPERIMENT_KEYS[norm]](str(value), norm)
    return parsed


def load_experiment_config(path) -> dict:
    """
    フラットな KEY=VALUE 形式の実験設定ファイルを読み込む。
    書式は .env と同じなので python-dotenv でパースする。
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"設定ファイルが見つかりません: {config_path}")
    raw = dotenv_values(config_path)
    logger.info(f"設定ファイル {config_path} を読み込みました ({len(raw)} キー)。")
    return parse_experiment_values(raw)
