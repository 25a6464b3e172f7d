import math
import logging
import itertools
from dataclasses import dataclass, field

import numpy as np

from fock_core import FockBasis, WaveFunction, map_blocks, ordered_sum
from errors import DimensionMismatchError, InvalidArgumentError, NoOverlapError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

ORTHONORMAL_TOLERANCE = 1e-10
# |η_J| がこれ未満の配置は W の係数を 0 にする
ETA_CUTOFF = 1e-15


@dataclass(frozen=True)
class OrbitalSet:
    """d×M の複素行列。列 n が軌道 φ_n"""

    matrix: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.complex128)
        if mat.ndim != 2:
            raise DimensionMismatchError("軌道行列は2次元である必要があります。")
        if mat.shape[1] > mat.shape[0]:
            raise InvalidArgumentError(
                f"軌道数 M={mat.shape[1]} が次元 d={mat.shape[0]} を超えています。"
            )
        if self.check and orthonormality_error(mat) > ORTHONORMAL_TOLERANCE:
            raise InvalidArgumentError(
                f"軌道が正規直交ではありません (誤差 {orthonormality_error(mat):.3e})。"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_orbitals(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ConfigAmplitudes:
    """全ての昇順 N タプル J ⊆ {0..M-1} に対する η_J (辞書式順序)"""

    basis: FockBasis
    tuples: np.ndarray
    values: np.ndarray

    @property
    def objective(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class ApproximantState:
    """W = Σ_J C_J S_J"""

    orbitals: OrbitalSet
    tuples: np.ndarray
    coefficients: np.ndarray


def orthonormality_error(matrix: np.ndarray) -> float:
    """max |V†V - I|"""
    matrix = np.asarray(matrix)
    gram = matrix.conj().T @ matrix
    return float(np.max(np.abs(gram - np.eye(matrix.shape[1])))) if matrix.shape[1] else 0.0


def _combination_array(items, size: int) -> np.ndarray:
    # size=0 でも (件数, 0) の形を保つ
    combos = list(itertools.combinations(items, size))
    return np.array(combos, dtype=np.int64).reshape(len(combos), size)


def configurations(n_orbitals: int, n_particles: int) -> np.ndarray:
    """{0..M-1} の昇順 N タプルを辞書式順序で返す"""
    return _combination_array(range(n_orbitals), n_particles)


def _check_pair(f: WaveFunction, V: OrbitalSet):
    if f.d != V.dim:
        raise DimensionMismatchError(f"次元が一致しません: f.d={f.d}, V.dim={V.dim}")
    if V.n_orbitals < f.n_particles:
        raise InvalidArgumentError(
            f"軌道数 M={V.n_orbitals} が粒子数 N={f.n_particles} より少ないです。"
        )


def subset_determinants(basis: FockBasis, matrix: np.ndarray, tuples: np.ndarray, start: int, stop: int) -> np.ndarray:
    """基底行 start:stop について det(V[X, J]) を全ての J で計算する。戻り値 (B, K)"""
    vx = matrix[basis.states[start:stop]]  # (B, N, M)
    sub = vx[:, :, tuples]  # (B, N, K, N)
    return np.linalg.det(np.moveaxis(sub, 2, 1))


def eta_all(f: WaveFunction, V: OrbitalSet) -> ConfigAmplitudes:
    """η_J = Σ_X C_X^* det(V[X, J])"""
    _check_pair(f, V)
    tuples = configurations(V.n_orbitals, f.n_particles)
    amps = f.amplitudes

    def block(start, stop):
        dets = subset_determinants(f.basis, V.matrix, tuples, start, stop)
        return amps[start:stop].conj() @ dets

    values = ordered_sum(map_blocks(f.basis.dimension, block))
    return ConfigAmplitudes(f.basis, tuples, np.asarray(values, dtype=np.complex128))


def objective(f: WaveFunction, V: OrbitalSet) -> float:
    return eta_all(f, V).objective


def g_matrix(f: WaveFunction, partner_stack: np.ndarray) -> np.ndarray:
    """
    partner_stack (d, K, N-1) の各パートナー組について g_J を計算し d×K 行列で返す。
    g_J(x) = Σ_X C_X Σ_m (-1)^m δ(x, x_m) conj(det Y_m)
    Y_m はパートナー行列の行 X から x_m を除いた (N-1)×(N-1) 小行列。
    """
    basis = f.basis
    n = f.n_particles
    partner_stack = np.asarray(partner_stack, dtype=np.complex128)
    if partner_stack.ndim != 3 or partner_stack.shape[0] != basis.d or partner_stack.shape[2] != n - 1:
        raise DimensionMismatchError(
            f"パートナー行列の形 {partner_stack.shape} が (d={basis.d}, K, N-1={n - 1}) と一致しません。"
        )
    k = partner_stack.shape[1]
    amps = f.amplitudes

    if n == 1:
        # N=1 では g は f 自身
        g = basis.slot_operator(0) @ amps
        return np.repeat(np.asarray(g)[:, None], k, axis=1)

    def block(start, stop):
        px = np.moveaxis(partner_stack[basis.states[start:stop]], 2, 1)  # (B, K, N, N-1)
        weights = []
        for m in range(n):
            minors = np.linalg.det(np.delete(px, m, axis=2))  # (B, K)
            weights.append(((-1) ** m) * amps[start:stop, None] * np.conj(minors))
        return weights

    parts = map_blocks(basis.dimension, block)
    terms = []
    for m in range(n):
        w_m = np.concatenate([part[m] for part in parts], axis=0)  # (D, K)
        terms.append(np.asarray(basis.slot_operator(m) @ w_m))
    return ordered_sum(terms)


def g_function(f: WaveFunction, partners: np.ndarray) -> np.ndarray:
    """N-1 本のパートナー軌道 (d×(N-1)) に対する g_J"""
    partners = np.asarray(partners, dtype=np.complex128).reshape(f.d, f.n_particles - 1)
    if f.n_particles > 1 and orthonormality_error(partners) > ORTHONORMAL_TOLERANCE:
        raise InvalidArgumentError("パートナー軌道は互いに正規直交である必要があります。")
    return g_matrix(f, partners[:, None, :])[:, 0]


def slot1_partner_sets(n_orbitals: int, n_particles: int) -> np.ndarray:
    """スロット1 (列0) を含む配置 J について、残りの N-1 軌道の組 (K, N-1)"""
    return _combination_array(range(1, n_orbitals), n_particles - 1)


def slot1_g_matrix(f: WaveFunction, V: OrbitalSet) -> np.ndarray:
    """スロット1を含む全ての配置の g_J を並べた d×C(M-1, N-1) 行列"""
    _check_pair(f, V)
    partner_sets = slot1_partner_sets(V.n_orbitals, f.n_particles)
    return g_matrix(f, V.matrix[:, partner_sets])


def slater_amplitudes(basis: FockBasis, V: OrbitalSet, tuples: np.ndarray) -> np.ndarray:
    """各 S_J の Fock 基底での係数を並べた D×K 行列"""
    def block(start, stop):
        return subset_determinants(basis, V.matrix, tuples, start, stop)

    return np.concatenate(map_blocks(basis.dimension, block), axis=0)


def approximant_state(amps: ConfigAmplitudes, V: OrbitalSet) -> ApproximantState:
    """最適係数 C_J ∝ η_J^* を選ぶ"""
    values = np.where(np.abs(amps.values) < ETA_CUTOFF, 0.0, amps.values)
    weight = float(np.sum(np.abs(values) ** 2))
    if weight <= 0.0:
        raise NoOverlapError("全ての η_J が 0 です。W を構成できません。")
    return ApproximantState(V, amps.tuples, np.conj(values) / math.sqrt(weight))


def reconstruct_W(amps: ConfigAmplitudes, V: OrbitalSet) -> WaveFunction:
    """W = Σ_J C_J S_J を Fock 基底に展開する。<f|W> = sqrt(I) は実の正"""
    state = approximant_state(amps, V)
    coeffs = state.coefficients

    def block(start, stop):
        return subset_determinants(amps.basis, V.matrix, state.tuples, start, stop) @ coeffs

    w = np.concatenate(map_blocks(amps.basis.dimension, block))
    return WaveFunction(amps.basis, w)
