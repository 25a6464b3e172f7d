import os
import tempfile
from pathlib import Path

import config_engine
from errors import ConfigError
from testkit import raises


def test_parse_real_grid():
    assert config_engine.parse_real_grid("0:2:0.5") == [0.0, 0.5, 1.0, 1.5, 2.0], "範囲指定が終端を含みません"
    assert config_engine.parse_real_grid("10, 40") == [10.0, 40.0], "カンマ区切りのパースが不正です"
    assert config_engine.parse_real_grid("0,5:7:1") == [0.0, 5.0, 6.0, 7.0], "混在した指定のパースが不正です"
    assert config_engine.parse_real_grid("0:100:1")[-1] == 100.0, "0:100:1 の終端が 100 ではありません"
    assert raises(ConfigError, config_engine.parse_real_grid, "0:1"), "要素数の足りない範囲が拒否されませんでした"
    assert raises(ConfigError, config_engine.parse_real_grid, "0:1:-1"), "負のステップが拒否されませんでした"
    assert raises(ConfigError, config_engine.parse_real_grid, ""), "空のグリッドが拒否されませんでした"


def test_parse_lists_and_scalars():
    assert config_engine.parse_int_list("3, 4,5") == [3, 4, 5], "整数リストのパースが不正です"
    assert config_engine.parse_real_list("-1,-2.5") == [-1.0, -2.5], "実数リストのパースが不正です"
    assert raises(ConfigError, config_engine.parse_int, "3.5", "N"), "整数でない値が拒否されませんでした"
    assert raises(ConfigError, config_engine.parse_real, "abc", "U"), "実数でない値が拒否されませんでした"


def test_experiment_values_are_case_insensitive():
    parsed = config_engine.parse_experiment_values({"L": "8", "n": "2", "M_LIST": "2,4", "U": "-1"})
    assert parsed == {"l": 8, "n": 2, "m_list": [2, 4], "u": -1.0}, f"パース結果が不正です: {parsed}"
    assert raises(ConfigError, config_engine.parse_experiment_values, {"colour": "red"}), "不明なキーが拒否されませんでした"


def test_load_experiment_config():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "run.env"
        path.write_text("# コメント\nKIND=gs_sweep\nN=2\nU_LIST=-1,-3\nL_RANGE=4,5\n")
        values = config_engine.load_experiment_config(path)
        assert values == {"kind": "gs_sweep", "n": 2, "u_list": [-1.0, -3.0], "l_range": [4, 5]}, f"読み込み結果が不正です: {values}"
        assert raises(ConfigError, config_engine.load_experiment_config, Path(tmp) / "missing.env"), "存在しない設定ファイルが拒否されませんでした"


def test_environment_settings():
    saved = os.environ.get("SLATER_FORGE_WORKERS")
    try:
        os.environ["SLATER_FORGE_WORKERS"] = "3"
        assert config_engine.get_workers() == 3, "SLATER_FORGE_WORKERS が反映されません"
        os.environ["SLATER_FORGE_WORKERS"] = "many"
        assert raises(ConfigError, config_engine.get_workers), "整数でないワーカー数が拒否されませんでした"
    finally:
        if saved is None:
            os.environ.pop("SLATER_FORGE_WORKERS", None)
        else:
            os.environ["SLATER_FORGE_WORKERS"] = saved
