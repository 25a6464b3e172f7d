import logging
from dataclasses import dataclass, field
from typing import NamedTuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

import config_engine
from fock_core import WaveFunction, fix_phase
from projection_engine import (
    OrbitalSet,
    ConfigAmplitudes,
    eta_all,
    orthonormality_error,
    slot1_g_matrix,
    ORTHONORMAL_TOLERANCE,
)
from closed_forms import one_particle_rdm, natural_orbitals
from errors import InvalidArgumentError, NumericalError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# T1 の最大固有値がこれ未満なら停滞とみなす
STAGNATION_EIGENVALUE = 1e-14
# 最大固有値の縮退判定 (相対)
DEGENERACY_RELATIVE = 1e-10
PLATEAU_RESOLUTION = 1e-6
INIT_MODES = ("random", "natural")


@dataclass(frozen=True)
class OptimizerConfig:
    n_orbitals: int
    max_sweeps: int = 500
    sweep_tolerance: float = 1e-12
    restarts: int = 6
    seed: int = 0
    init: str = "random"
    workers: int | None = None

    def __post_init__(self):
        if self.n_orbitals < 1:
            raise InvalidArgumentError(f"M は 1 以上である必要があります: {self.n_orbitals}")
        if self.restarts < 1:
            raise InvalidArgumentError(f"restarts は 1 以上である必要があります: {self.restarts}")
        if self.max_sweeps < 1:
            raise InvalidArgumentError(f"max_sweeps は 1 以上である必要があります: {self.max_sweeps}")
        if not self.sweep_tolerance > 0:
            raise InvalidArgumentError(f"sweep_tolerance は正である必要があります: {self.sweep_tolerance}")
        if self.init not in INIT_MODES:
            raise InvalidArgumentError(f"init は {INIT_MODES} のいずれかです: {self.init!r}")


@dataclass
class OptimizationTrace:
    """1回のリスタートの記録。values は1軌道更新ごとの I"""

    restart_id: int
    seed: int
    initial_objective: float
    values: list = field(default_factory=list)
    orbitals: OrbitalSet | None = None
    amplitudes: ConfigAmplitudes | None = None
    converged: bool = False
    sweeps: int = 0
    stagnated: bool = False

    @property
    def final_objective(self) -> float:
        if self.amplitudes is not None:
            return self.amplitudes.objective
        return self.values[-1] if self.values else self.initial_objective


@dataclass
class OptimizationResult:
    best: OptimizationTrace
    traces: list

    @property
    def finals(self) -> list[float]:
        return [t.final_objective for t in self.traces]

    @property
    def spread(self) -> float:
        finals = self.finals
        return float(max(finals) - min(finals))

    @property
    def plateau_count(self) -> int:
        """最終値を PLATEAU_RESOLUTION で区切ったときの異なる値の数"""
        finals = sorted(self.finals)
        return 1 + sum(1 for a, b in zip(finals, finals[1:]) if b - a > PLATEAU_RESOLUTION)


class SlotUpdate(NamedTuple):
    orbitals: OrbitalSet
    objective: float
    stagnated: bool


def _orthonormalize(matrix: np.ndarray) -> np.ndarray:
    """列の順序を保つ QR。R の対角が正になるよう Q の列の位相を揃える"""
    q, r = np.linalg.qr(matrix)
    diag = np.diag(r)
    phases = np.ones_like(diag)
    nonzero = np.abs(diag) > 0
    phases[nonzero] = diag[nonzero] / np.abs(diag[nonzero])
    return q * phases[None, :]


def random_orbitals(d: int, n_orbitals: int, seed: int) -> OrbitalSet:
    """シード付き複素ガウス行列を正規直交化した d×M 軌道"""
    if n_orbitals < 1 or n_orbitals > d:
        raise InvalidArgumentError(f"1 <= M <= d である必要があります (d={d}, M={n_orbitals})。")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((d, n_orbitals)) + 1j * rng.standard_normal((d, n_orbitals))
    return OrbitalSet(_orthonormalize(z))


def natural_orbital_init(f: WaveFunction, n_orbitals: int) -> OrbitalSet:
    """占有数の大きい M 本の自然軌道"""
    if n_orbitals < 1 or n_orbitals > f.d:
        raise InvalidArgumentError(f"1 <= M <= d である必要があります (d={f.d}, M={n_orbitals})。")
    _, orbitals = natural_orbitals(one_particle_rdm(f))
    return OrbitalSet(orbitals[:, :n_orbitals])


def reorthonormalize(V: OrbitalSet) -> OrbitalSet:
    return OrbitalSet(_orthonormalize(V.matrix))


def power_step(rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    """ρ1 のべき乗法1ステップ (正規化・位相固定済み)"""
    w = np.asarray(rho) @ np.asarray(v, dtype=np.complex128)
    norm = np.linalg.norm(w)
    if norm == 0.0:
        return np.asarray(v, dtype=np.complex128)
    return fix_phase(w / norm)


def _top_eigenvector(t1: np.ndarray, previous: np.ndarray) -> tuple[np.ndarray, float]:
    values, vectors = scipy.linalg.eigh(t1)
    top = values[-1]
    degenerate = values >= top - DEGENERACY_RELATIVE * max(abs(top), 1.0)
    if np.count_nonzero(degenerate) == 1:
        return vectors[:, -1], float(top)
    # 縮退した最大固有空間では現在の φ1 の射影を選ぶ
    space = vectors[:, degenerate]
    v = space @ (space.conj().T @ previous)
    if np.linalg.norm(v) < 1e-8:
        return vectors[:, -1], float(top)
    return v / np.linalg.norm(v), float(top)


def update_slot1(f: WaveFunction, V: OrbitalSet, current: float | None = None) -> SlotUpdate:
    """
    φ1 を T1 = Σ_J |g~_J><g~_J| の最大固有ベクトルで置き換える。
    g~_J = (1 - P) g_J、P は φ2..φM への射影。
    current は更新前の I (省略すると計算する)。I_new = I_old - <φ1|T1|φ1> + λ_max。
    """
    if current is None:
        current = eta_all(f, V).objective
    matrix = V.matrix
    phi_old = matrix[:, 0]
    others = matrix[:, 1:]

    g = slot1_g_matrix(f, V)
    g_tilde = g - others @ (others.conj().T @ g)
    old_part = float(np.sum(np.abs(g_tilde.conj().T @ phi_old) ** 2))

    if g_tilde.shape[1] == 1:
        # 配置が1つ (M=N) なら φ1 は g~ に比例する
        lam = float(np.real(np.vdot(g_tilde[:, 0], g_tilde[:, 0])))
        phi_new = g_tilde[:, 0] / np.sqrt(lam) if lam >= STAGNATION_EIGENVALUE else None
    else:
        t1 = g_tilde @ g_tilde.conj().T
        t1 = 0.5 * (t1 + t1.conj().T)
        phi_new, lam = _top_eigenvector(t1, phi_old)
        if lam < STAGNATION_EIGENVALUE:
            phi_new = None

    if phi_new is None:
        logger.debug(f"T1 が数値的にゼロです (λ_max={lam:.3e})。φ1 を保持します。")
        return SlotUpdate(V, float(current), True)

    # 数値誤差で混入した φ2..φM 成分を除く
    phi_new = phi_new - others @ (others.conj().T @ phi_new)
    phi_new = fix_phase(phi_new / np.linalg.norm(phi_new))
    updated = matrix.copy()
    updated[:, 0] = phi_new
    value = float(current) - old_part + max(lam, old_part)
    return SlotUpdate(OrbitalSet(updated, check=False), value, False)


def _shift(V: OrbitalSet) -> OrbitalSet:
    """φ_i → φ_{i+1} の巡回シフト (φ_M は φ1 になる)"""
    return OrbitalSet(np.roll(V.matrix, 1, axis=1), check=False)


def sweep(f: WaveFunction, V: OrbitalSet, current: float | None = None) -> tuple[OrbitalSet, list[float], bool]:
    """M 回の (スロット1更新 → 巡回シフト)。各更新後の I を記録する"""
    if current is None:
        current = eta_all(f, V).objective
    segment = []
    stagnated = False
    for _ in range(V.n_orbitals):
        V, current, stalled = update_slot1(f, V, current)
        stagnated |= stalled
        segment.append(current)
        V = _shift(V)
    drift = orthonormality_error(V.matrix)
    if drift > ORTHONORMAL_TOLERANCE:
        logger.warning(f"軌道の直交性がずれています (誤差 {drift:.3e})。再直交化します。")
        V = reorthonormalize(V)
    return OrbitalSet(V.matrix), segment, stagnated


def _initial_orbitals(f: WaveFunction, config: OptimizerConfig, restart_id: int) -> OrbitalSet:
    if config.init == "natural" and restart_id == 0:
        return natural_orbital_init(f, config.n_orbitals)
    return random_orbitals(f.d, config.n_orbitals, config.seed + restart_id)


def run_restart(f: WaveFunction, config: OptimizerConfig, restart_id: int) -> OptimizationTrace:
    """1回分の最適化: ΔI (1スイープ) < sweep_tolerance か max_sweeps まで"""
    V = _initial_orbitals(f, config, restart_id)
    current = eta_all(f, V).objective
    trace = OptimizationTrace(restart_id, config.seed + restart_id, current)
    for _ in range(config.max_sweeps):
        V, segment, stagnated = sweep(f, V, current)
        trace.values.extend(segment)
        trace.stagnated |= stagnated
        trace.sweeps += 1
        # スイープごとに厳密な I を計算し直して漸化式の誤差の蓄積を防ぐ
        exact = eta_all(f, V).objective
        if not np.isfinite(exact):
            raise NumericalError(f"リスタート {restart_id} で I が有限でなくなりました ({exact})。")
        delta = exact - current
        current = exact
        if abs(delta) < config.sweep_tolerance:
            trace.converged = True
            break
    trace.orbitals = V
    trace.amplitudes = eta_all(f, V)
    if not trace.converged:
        logger.warning(
            f"リスタート {restart_id} は {config.max_sweeps} スイープで収束しませんでした "
            f"(I={trace.final_objective:.12f})。"
        )
    if trace.stagnated:
        logger.warning(f"リスタート {restart_id} で T1 がゼロになる停滞が発生しました。")
    return trace


def optimize(f: WaveFunction, config: OptimizerConfig) -> OptimizationResult:
    """restarts 回の独立な最適化を行い、最終 I が最大のものを返す (同値なら番号の小さい方)"""
    if config.n_orbitals < f.n_particles or config.n_orbitals > f.d:
        raise InvalidArgumentError(
            f"N <= M <= d である必要があります (N={f.n_particles}, M={config.n_orbitals}, d={f.d})。"
        )
    workers = config.workers or config_engine.get_workers()
    restart_ids = range(config.restarts)
    if workers <= 1 or config.restarts == 1:
        traces = [run_restart(f, config, r) for r in restart_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(lambda r: run_restart(f, config, r), restart_ids))

    best = traces[0]
    for trace in traces[1:]:
        if trace.final_objective > best.final_objective:
            best = trace
    result = OptimizationResult(best, traces)
    logger.info(
        f"最適化完了: M={config.n_orbitals}, 最良 I={best.final_objective:.12f} "
        f"(リスタート {best.restart_id}), ばらつき={result.spread:.3e}, プラトー数={result.plateau_count}"
    )
    return result
