import math
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from fock_core import FockBasis, WaveFunction, inner, slater_amplitudes
from lattice_engine import density
from errors import (
    InvalidArgumentError,
    DimensionMismatchError,
    DegenerateStateError,
)

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
DENSITY_BOUND_SLACK = 1e-10


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """ρ1(x, y) = <f| c_y^† c_x |f>。トレースは N"""

    matrix: np.ndarray
    n_particles: int

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        """降順の占有数"""
        return np.sort(scipy.linalg.eigvalsh(self.matrix))[::-1]


@dataclass(frozen=True)
class TwoFermionResult:
    value: float
    pair_occupations: np.ndarray  # C_α (降順)
    orbitals: np.ndarray  # d×M の自然軌道
    cutoff_gap: float  # λ_M - λ_{M+1}


@dataclass(frozen=True)
class TwoBosonResult:
    value: float
    occupations: np.ndarray  # D_α (降順)


@dataclass(frozen=True)
class HoleDecomposition:
    hole_orbital: np.ndarray
    complement_orbitals: np.ndarray
    reconstruction_error: float
    contraction_residual: float
    expansion_coefficients: np.ndarray  # A_1..A_{N+1}


@dataclass(frozen=True)
class DensityBoundCheck:
    epsilon: float
    delta1: float
    bound: float
    bound_ok: bool


def one_particle_rdm(f: WaveFunction) -> ReducedDensityMatrix:
    """
    A[R, x] = (-1)^m C_X (X = R ∪ {x}, x は X の m 番目) を作り、ρ1 = A^T A^* とする。
    A[R, x] は c_x|f> の |R> 成分。
    """
    basis = f.basis
    n = f.n_particles
    amps = f.amplitudes
    if n == 1:
        a = np.zeros((1, basis.d), dtype=np.complex128)
        a[0, basis.states[:, 0]] = amps
    else:
        reduced = FockBasis(basis.d, n - 1)
        a = np.zeros((reduced.dimension, basis.d), dtype=np.complex128)
        for m in range(n):
            rest = np.delete(basis.states, m, axis=1)
            a[reduced.rank_many(rest), basis.states[:, m]] = ((-1) ** m) * amps
    rho = a.T @ a.conj()
    # 数値的なエルミート性を保証する
    rho = 0.5 * (rho + rho.conj().T)
    return ReducedDensityMatrix(rho, n)


def natural_orbitals(rdm: ReducedDensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """降順の占有数と自然軌道。各軌道は最初の非零成分が正の実数になるよう位相を固定する"""
    values, vectors = scipy.linalg.eigh(rdm.matrix)
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        nonzero = np.nonzero(np.abs(vectors[:, k]) > 1e-12)[0]
        if len(nonzero):
            pivot = vectors[nonzero[0], k]
            vectors[:, k] *= np.abs(pivot) / pivot
    return values, vectors


def imax_two_fermion(f: WaveFunction, n_orbitals: int) -> TwoFermionResult:
    """N=2 の I_max = Σ_{α<=M/2} C_α。最適軌道は占有数の大きい M 本の自然軌道"""
    if f.n_particles != 2:
        raise InvalidArgumentError(f"2フェルミオン状態が必要です (N={f.n_particles})。")
    if n_orbitals % 2 != 0:
        raise InvalidArgumentError(
            f"M は偶数である必要があります (M={n_orbitals})。"
            "N=2 では奇数の M は M-1 本で作れる状態しか表さないため無駄になります。"
        )
    if n_orbitals < 2 or n_orbitals > f.d:
        raise InvalidArgumentError(f"2 <= M <= d である必要があります (M={n_orbitals}, d={f.d})。")
    occupations, orbitals = natural_orbitals(one_particle_rdm(f))
    # 固有値は縮退したペア (C_α, C_α) で現れるので、降順に2つずつ組にする
    pairs = occupations[0::2]
    value = float(0.5 * np.sum(occupations[:n_orbitals]))
    gap = float(occupations[n_orbitals - 1] - occupations[n_orbitals]) if n_orbitals < f.d else math.inf
    if gap < 1e-8:
        logger.warning(f"M={n_orbitals} の位置で占有数がほぼ縮退しています (ギャップ {gap:.3e})。")
    return TwoFermionResult(value, pairs, orbitals[:, :n_orbitals], gap)


def imax_two_boson(b: np.ndarray, n_orbitals: int) -> TwoBosonResult:
    """対称な2ボソン振幅 b(x1, x2) の I_max = Σ_{α<=M} D_α (b の特異値の2乗)"""
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionMismatchError(f"b は正方行列である必要があります: {b.shape}")
    if np.max(np.abs(b - b.T)) > SYMMETRY_TOLERANCE:
        raise InvalidArgumentError("b は対称 (b(x1,x2) = b(x2,x1)) である必要があります。")
    if n_orbitals < 1 or n_orbitals > b.shape[0]:
        raise InvalidArgumentError(f"1 <= M <= d である必要があります (M={n_orbitals})。")
    norm = np.linalg.norm(b)
    if norm == 0.0:
        raise DegenerateStateError("b がゼロです。")
    if abs(norm - 1.0) > 1e-10:
        logger.warning(f"b が正規化されていません (ノルム {norm:.6f})。正規化して計算します。")
        b = b / norm
    occupations = scipy.linalg.svdvals(b) ** 2
    return TwoBosonResult(float(np.sum(occupations[:n_orbitals])), occupations)


def upper_bound(f: WaveFunction, n_orbitals: int) -> float:
    """I_max <= (1/N) Σ_{i<=M} λ_i"""
    if n_orbitals < 1 or n_orbitals > f.d:
        raise InvalidArgumentError(f"1 <= M <= d である必要があります (M={n_orbitals}, d={f.d})。")
    if n_orbitals == f.d:
        return 1.0
    occupations = one_particle_rdm(f).eigenvalues()
    value = float(np.sum(occupations[:n_orbitals]) / f.n_particles)
    return min(max(value, 0.0), 1.0)


def _contraction_residual(f: WaveFunction, hole: np.ndarray) -> float:
    """max |Σ_x f(x_1, ..., x_{N-1}, x) hole^*(x)|"""
    basis = f.basis
    n = f.n_particles
    scale = 1.0 / math.sqrt(math.factorial(n))
    if n == 1:
        return float(abs(np.sum(f.amplitudes * scale * np.conj(hole[basis.states[:, 0]]))))
    reduced = FockBasis(basis.d, n - 1)
    contraction = np.zeros(reduced.dimension, dtype=np.complex128)
    for m in range(n):
        # x_m を末尾の引数に移す置換の符号
        sign = (-1) ** (n - 1 - m)
        rest = reduced.rank_many(np.delete(basis.states, m, axis=1))
        np.add.at(
            contraction,
            rest,
            sign * scale * f.amplitudes * np.conj(hole[basis.states[:, m]]),
        )
    return float(np.max(np.abs(contraction)))


def hole_decomposition(f: WaveFunction) -> HoleDecomposition:
    """
    d = N+1 の状態を空孔軌道 φ_hole = Σ_j (-1)^j A_j^* φ_j とその補空間の Slater 行列式に分解する。
    A_j はサイト j-1 を除いた配置の係数。
    """
    basis = f.basis
    n = f.n_particles
    if basis.d != n + 1:
        raise DimensionMismatchError(f"d = N+1 である必要があります (d={basis.d}, N={n})。")
    if f.norm() == 0.0:
        raise DegenerateStateError("f がゼロです。")
    f = f.normalized()
    coefficients = np.array(
        [
            f.amplitudes[basis.rank(tuple(s for s in range(basis.d) if s != j - 1))]
            for j in range(1, basis.d + 1)
        ],
        dtype=np.complex128,
    )
    signs = np.array([(-1) ** j for j in range(1, basis.d + 1)])
    hole = signs * np.conj(coefficients)
    hole = hole / np.linalg.norm(hole)

    complement = scipy.linalg.null_space(hole.conj()[None, :]).astype(np.complex128)
    slater = slater_amplitudes(basis, complement)
    overlap = np.vdot(f.amplitudes, slater)
    if abs(overlap) > 0.0:
        complement[:, 0] *= np.conj(overlap) / abs(overlap)
        slater = slater * (np.conj(overlap) / abs(overlap))
    error = float(np.linalg.norm(f.amplitudes - slater))
    return HoleDecomposition(
        hole_orbital=hole,
        complement_orbitals=complement,
        reconstruction_error=error,
        contraction_residual=_contraction_residual(f, hole),
        expansion_coefficients=coefficients,
    )


def density_distance_bound_check(f1: WaveFunction, f2: WaveFunction) -> DensityBoundCheck:
    """ε = 1 - <f1|f2> (位相を揃えた後)、δ1 = (1/N) Σ_x |n1(x) - n2(x)|、δ1 <= sqrt(8ε) を確認する"""
    overlap = inner(f1, f2)
    # 1 - |<f1|f2>| は f2 ≈ f1 で桁落ちするので、位相を揃えた差のノルムから求める
    phase = np.conj(overlap) / abs(overlap) if abs(overlap) > 0.0 else 1.0
    epsilon = 0.5 * float(np.sum(np.abs(f1.amplitudes - phase * f2.amplitudes) ** 2))
    delta1 = float(np.sum(np.abs(density(f1) - density(f2))) / f1.n_particles)
    bound = math.sqrt(8.0 * epsilon)
    ok = delta1 <= bound + DENSITY_BOUND_SLACK
    if not ok:
        logger.warning(f"密度距離の上限が破れています: δ1={delta1:.3e}, sqrt(8ε)={bound:.3e}")
    return DensityBoundCheck(epsilon, delta1, bound, ok)


def bound_report_line(n_orbitals: int, i_opt: float, i_upper: float) -> str:
    return f"{n_orbitals}, {i_opt:.17g}, {i_upper:.17g}"
