import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse

from fock_core import FockBasis, WaveFunction, embed, fix_phase
from projection_engine import OrbitalSet
from errors import InvalidDimensionError, DimensionMismatchError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

DEGENERACY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ChainSpec:
    """
    開放端の1次元スピンレスフェルミオン鎖。ホッピング振幅は 1 に固定。
    confinement が指定されると、初期状態は左端 L_i サイトに閉じ込められる。
    """

    length: int
    n_particles: int
    interaction: float = 0.0
    confinement: int | None = None

    def __post_init__(self):
        if self.n_particles < 1 or self.n_particles > self.length:
            raise InvalidDimensionError(
                f"1 <= N <= L である必要があります (L={self.length}, N={self.n_particles})。"
            )
        if self.confinement is not None and not (
            self.n_particles <= self.confinement <= self.length
        ):
            raise InvalidDimensionError(
                f"N <= L_i <= L である必要があります (L_i={self.confinement})。"
            )
        object.__setattr__(self, "interaction", float(self.interaction))

    @property
    def basis(self) -> FockBasis:
        return _basis(self.length, self.n_particles)

    def confined_chain(self) -> "ChainSpec":
        """閉じ込め領域 (L_i サイト) だけの鎖"""
        if self.confinement is None:
            return self
        return ChainSpec(self.confinement, self.n_particles, self.interaction)

    def released(self, interaction: float | None = None) -> "ChainSpec":
        """閉じ込めを外した (必要なら U をクエンチした) 全長 L の鎖"""
        u = self.interaction if interaction is None else interaction
        return ChainSpec(self.length, self.n_particles, u)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@lru_cache(maxsize=32)
def _basis(length: int, n_particles: int) -> FockBasis:
    return FockBasis(length, n_particles)


def _hopping_pairs(basis: FockBasis) -> tuple[np.ndarray, np.ndarray]:
    """
    右隣の空きサイトへ1粒子を動かす遷移 (src, dst) を全て列挙する。
    隣接サイト間には他の粒子がないので、フェルミオン符号は常に +1。
    """
    states = basis.states
    n = basis.n_particles
    src, dst = [], []
    for m in range(n):
        target = states[:, m] + 1
        allowed = target < basis.d
        if m + 1 < n:
            allowed &= states[:, m + 1] != target
        idx = np.nonzero(allowed)[0]
        moved = states[idx].copy()
        moved[:, m] += 1
        src.append(idx)
        dst.append(basis.rank_many(moved))
    return np.concatenate(src), np.concatenate(dst)


def _bond_counts(basis: FockBasis) -> np.ndarray:
    """各配置の隣接占有ペアの数"""
    if basis.n_particles < 2:
        return np.zeros(basis.dimension)
    return np.sum(np.diff(basis.states, axis=1) == 1, axis=1).astype(float)


def build_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """全長 L の鎖のハミルトニアン (実対称の密行列)"""
    basis = spec.basis
    src, dst = _hopping_pairs(basis)
    rows = np.concatenate([src, dst, np.arange(basis.dimension)])
    cols = np.concatenate([dst, src, np.arange(basis.dimension)])
    data = np.concatenate(
        [-np.ones(len(src)), -np.ones(len(src)), spec.interaction * _bond_counts(basis)]
    )
    h = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(basis.dimension,) * 2)
    return h.toarray()


def single_particle_hamiltonian(length: int) -> np.ndarray:
    """開放端の一粒子ホッピング行列"""
    h = np.zeros((length, length))
    idx = np.arange(length - 1)
    h[idx, idx + 1] = -1.0
    h[idx + 1, idx] = -1.0
    return h


@lru_cache(maxsize=3)
def spectral_decomposition(spec: ChainSpec) -> SpectralDecomposition:
    """全スペクトルの密な対角化。固有ベクトルは絶対値最大の成分が正になるよう符号を揃える"""
    h = build_hamiltonian(spec)
    logger.info(f"ハミルトニアンを対角化します (L={spec.length}, N={spec.n_particles}, 次元={len(h)})。")
    energies, vectors = scipy.linalg.eigh(h)
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors = vectors * signs
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return SpectralDecomposition(energies, vectors)


def ground_state(spec: ChainSpec) -> WaveFunction:
    """全長 L の鎖の基底状態。基底準位が縮退していれば警告して1本を返す"""
    basis = spec.basis
    if basis.dimension == 1:
        return WaveFunction(basis, np.ones(1))
    h = build_hamiltonian(spec)
    energies, vectors = scipy.linalg.eigh(h, subset_by_index=[0, 1])
    if energies[1] - energies[0] < DEGENERACY_TOLERANCE:
        logger.warning(
            f"基底準位が縮退しています (L={spec.length}, N={spec.n_particles}, U={spec.interaction}, "
            f"ギャップ={energies[1] - energies[0]:.3e})。固有ベクトルを1本だけ返します。"
        )
    return WaveFunction(basis, fix_phase(vectors[:, 0])).normalized()


def confined_ground_state(spec: ChainSpec) -> WaveFunction:
    """左端 L_i サイトの鎖の基底状態を全長 L の基底に埋め込む"""
    if spec.confinement is None:
        return ground_state(spec)
    inner_state = ground_state(spec.confined_chain())
    return embed(inner_state, spec.basis)


def evolve(spec: ChainSpec, psi0: WaveFunction, t: float) -> WaveFunction:
    """ψ(t) = Σ_k v_k exp(-i E_k t) <v_k|ψ0>"""
    return evolve_many(spec, psi0, [t])[0]


def evolve_many(spec: ChainSpec, psi0: WaveFunction, times) -> list[WaveFunction]:
    basis = spec.basis
    if psi0.basis != basis:
        raise DimensionMismatchError(f"状態の基底 {psi0.basis} が鎖の基底 {basis} と一致しません。")
    decomposition = spectral_decomposition(spec.released())
    coeffs = decomposition.eigenvectors.T @ psi0.amplitudes
    states = []
    for t in times:
        if t == 0:
            states.append(psi0)
            continue
        phases = np.exp(-1j * decomposition.eigenvalues * float(t))
        states.append(WaveFunction(basis, decomposition.eigenvectors @ (phases * coeffs)))
    return states


def density(f: WaveFunction) -> np.ndarray:
    """<n_i> = Σ_{X ∋ i} |C_X|^2"""
    weights = np.abs(f.amplitudes) ** 2
    return np.bincount(
        f.basis.states.ravel(),
        weights=np.repeat(weights, f.n_particles),
        minlength=f.d,
    )


def interaction_energy(f: WaveFunction, interaction: float) -> float:
    """U Σ_i <n_i n_{i+1}>"""
    weights = np.abs(f.amplitudes) ** 2
    return float(interaction * np.dot(weights, _bond_counts(f.basis)))


def hopping_energy(f: WaveFunction) -> float:
    """-Σ_i <c_i^† c_{i+1} + h.c.>"""
    src, dst = _hopping_pairs(f.basis)
    amps = f.amplitudes
    return float(-2.0 * np.real(np.vdot(amps[dst], amps[src])))


def energy(spec: ChainSpec, f: WaveFunction) -> float:
    return hopping_energy(f) + interaction_energy(f, spec.interaction)


def free_orbitals(length: int, confinement: int, t: float) -> OrbitalSet:
    """
    サイト 0..L_i-1 の軌道を自由一粒子ハミルトニアンで時間発展させたもの。
    U=0 へのクエンチ後の状態はこの L_i 軌道で厳密に表せる。
    """
    propagator = scipy.linalg.expm(-1j * single_particle_hamiltonian(length) * float(t))
    return OrbitalSet(propagator[:, :confinement])


def cdw_state(n_particles: int) -> WaveFunction:
    """L=2N-1 で1つおきのサイトを占有した電荷密度波配置"""
    basis = _basis(2 * n_particles - 1, n_particles)
    amps = np.zeros(basis.dimension, dtype=np.complex128)
    amps[basis.rank(tuple(range(0, 2 * n_particles - 1, 2)))] = 1.0
    return WaveFunction(basis, amps)
