import sys
import time
import logging
import argparse

import numpy as np

import lattice_engine
import optimizer_engine
import projection_engine
from fock_core import FockBasis, random_wavefunction
from lattice_engine import ChainSpec

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# ベンチマーク設定 (受け入れテストと同じ規模)
BENCH_LENGTH = 20
BENCH_PARTICLES = 4
BENCH_ORBITALS = 6
BENCH_SEED = 0


def _timed(label: str, fn, repeats: int) -> float:
    """fn を repeats 回実行し、1回あたりの平均時間を返す"""
    logger.info(f"--- {label} のベンチマークを開始します ({repeats} 回) ---")
    start_time = time.perf_counter()
    for _ in range(repeats):
        fn()
    end_time = time.perf_counter()
    elapsed_time = end_time - start_time
    avg_time = elapsed_time / repeats
    logger.info(f"{label} 完了。合計時間: {elapsed_time:.4f} 秒")
    logger.info(f"1 回あたりの平均時間: {avg_time:.6f} 秒")
    return avg_time


def benchmark_eta_all(f, V, repeats: int) -> float:
    return _timed(f"eta_all (C({V.n_orbitals},{f.n_particles}) 配置)", lambda: projection_engine.eta_all(f, V), repeats)


def benchmark_g_function(f, V, repeats: int) -> float:
    partners = V.matrix[:, 1 : f.n_particles]
    return _timed("g_function", lambda: projection_engine.g_function(f, partners), repeats)


def benchmark_update_slot1(f, V, repeats: int) -> float:
    current = projection_engine.eta_all(f, V).objective
    return _timed("update_slot1", lambda: optimizer_engine.update_slot1(f, V, current), repeats)


def benchmark_sweep(f, V, repeats: int) -> float:
    current = projection_engine.eta_all(f, V).objective
    return _timed("sweep", lambda: optimizer_engine.sweep(f, V, current), repeats)


def benchmark_hamiltonian(spec: ChainSpec, repeats: int) -> float:
    return _timed(f"build_hamiltonian (次元 {spec.basis.dimension})", lambda: lattice_engine.build_hamiltonian(spec), repeats)


def benchmark_spectral_decomposition(spec: ChainSpec, repeats: int) -> float:
    def run():
        # キャッシュを外して毎回対角化する
        lattice_engine.spectral_decomposition.cache_clear()
        lattice_engine.spectral_decomposition(spec)

    return _timed("spectral_decomposition", run, repeats)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="slater-forge の計算核のベンチマーク")
    parser.add_argument("--repeats", type=int, default=5, help="各計測の繰り返し回数")
    args = parser.parse_args(argv)

    logger.info("=====================================")
    logger.info("  slater-forge ベンチマーク開始")
    logger.info("=====================================")

    spec = ChainSpec(BENCH_LENGTH, BENCH_PARTICLES, 1.0)
    f = random_wavefunction(FockBasis(BENCH_LENGTH, BENCH_PARTICLES), seed=BENCH_SEED)
    V = optimizer_engine.random_orbitals(BENCH_LENGTH, BENCH_ORBITALS, seed=BENCH_SEED)

    results = {
        "eta_all": benchmark_eta_all(f, V, args.repeats),
        "g_function": benchmark_g_function(f, V, args.repeats),
        "update_slot1": benchmark_update_slot1(f, V, args.repeats),
        "sweep": benchmark_sweep(f, V, max(1, args.repeats // 5)),
        "build_hamiltonian": benchmark_hamiltonian(spec, args.repeats),
        "spectral_decomposition": benchmark_spectral_decomposition(spec, 1),
    }

    logger.info("=====================================")
    logger.info(f"  結果 (L={BENCH_LENGTH}, N={BENCH_PARTICLES}, M={BENCH_ORBITALS})")
    logger.info("=====================================")
    for label, seconds in results.items():
        logger.info(f"{label}: {seconds:.6f} 秒")
    logger.info(f"合計: {np.sum(list(results.values())):.4f} 秒")
    return 0


if __name__ == "__main__":
    sys.exit(main())
