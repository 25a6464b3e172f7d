import sys
import logging
import argparse

import numpy as np

import config_engine
from experiment_engine import EXPERIMENT_KINDS, ExperimentSpec, run_experiment
from errors import SlaterForgeError, EXIT_OK, exit_code_for

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slater-forge",
        description="多配置 Slater 行列式近似の最適軌道を求め、数値実験を再現します。",
    )
    parser.add_argument("command", choices=EXPERIMENT_KINDS, help="実行する実験")
    parser.add_argument("--config", required=True, help="KEY=VALUE 形式の実験設定ファイル")
    parser.add_argument("--out", default=None, help="出力ディレクトリ (設定の output_dir より優先)")
    parser.add_argument("--seed", type=int, default=None, help="最初のリスタートのシード")
    parser.add_argument("--restarts", type=int, default=None, help="リスタート回数")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config_engine.VERSION}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_engine.configure_logging()
    try:
        values = config_engine.load_experiment_config(args.config)
        # CLI フラグは設定ファイルの値を上書きする
        if args.out is not None:
            values["output_dir"] = args.out
        if args.seed is not None:
            values["seed"] = args.seed
        if args.restarts is not None:
            values["restarts"] = args.restarts
        spec = ExperimentSpec.from_config(values, args.command)
        run_experiment(spec)
    except SlaterForgeError as e:
        logger.error(f"エラー [{e.code}]: {e.message}")
        return exit_code_for(e)
    except np.linalg.LinAlgError as e:
        logger.error(f"数値計算に失敗しました: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.critical(f"予期しないエラーが発生しました: {e}")
        return exit_code_for(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
