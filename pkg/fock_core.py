import math
import logging
import itertools
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse

import config_engine
from errors import (
    InvalidDimensionError,
    InvalidTupleError,
    InvalidArgumentError,
    DimensionMismatchError,
    DegenerateStateError,
)

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12


class FockBasis:
    """
    d 次元の一粒子空間上の N フェルミオン配置の辞書式順序の列挙。
    states[k] は狭義単調増加の N タプル (x_1 < ... < x_N)。
    構築後は変更しない (読み取り専用の配列のみを持つ)。
    """

    def __init__(self, d: int, n_particles: int):
        if not isinstance(d, (int, np.integer)) or not isinstance(n_particles, (int, np.integer)):
            raise InvalidDimensionError("d と n は整数である必要があります。")
        if n_particles < 1 or n_particles > d:
            raise InvalidDimensionError(
                f"1 <= n <= d である必要があります (d={d}, n={n_particles})。"
            )
        self.d = int(d)
        self.n_particles = int(n_particles)

        states = np.array(
            list(itertools.combinations(range(self.d), self.n_particles)), dtype=np.int64
        ).reshape(-1, self.n_particles)
        states.setflags(write=False)
        self.states = states

        # comb_table[a, r] = C(a, r)
        table = np.zeros((self.d + 2, self.n_particles + 2), dtype=np.int64)
        for a in range(self.d + 2):
            for r in range(self.n_particles + 2):
                table[a, r] = math.comb(a, r)
        table.setflags(write=False)
        self._comb_table = table

        # スロット m の粒子位置を射影する d×D の疎行列 (g の散布に使う)
        dim = len(states)
        self._slot_operators = tuple(
            scipy.sparse.csr_matrix(
                (np.ones(dim), (states[:, m], np.arange(dim))), shape=(self.d, dim)
            )
            for m in range(self.n_particles)
        )

    @property
    def dimension(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FockBasis)
            and self.d == other.d
            and self.n_particles == other.n_particles
        )

    def __hash__(self) -> int:
        return hash((self.d, self.n_particles))

    def __repr__(self) -> str:
        return f"FockBasis(d={self.d}, n={self.n_particles}, count={self.dimension})"

    def slot_operator(self, m: int):
        return self._slot_operators[m]

    def validate_tuple(self, tup) -> tuple:
        tup = tuple(int(x) for x in tup)
        if len(tup) != self.n_particles:
            raise InvalidTupleError(
                f"タプルの長さは {self.n_particles} である必要があります: {tup}"
            )
        if any(x < 0 or x >= self.d for x in tup):
            raise InvalidTupleError(f"タプルの要素が範囲 [0, {self.d}) の外です: {tup}")
        if any(a >= b for a, b in zip(tup, tup[1:])):
            raise InvalidTupleError(f"タプルは狭義単調増加である必要があります: {tup}")
        return tup

    def rank(self, tup) -> int:
        """辞書式順序でのタプルの位置を返す"""
        tup = self.validate_tuple(tup)
        return int(self.rank_many(np.array([tup], dtype=np.int64))[0])

    def rank_many(self, tuples: np.ndarray) -> np.ndarray:
        """
        検証済みの昇順タプル配列 (K, N) の位置を一括で計算する。
        rank = Σ_i [C(d-prev-1, N-i) - C(d-x_i, N-i)], prev は直前の要素 (先頭は -1)。
        """
        tuples = np.asarray(tuples, dtype=np.int64).reshape(-1, self.n_particles)
        ranks = np.zeros(len(tuples), dtype=np.int64)
        prev = np.full(len(tuples), -1, dtype=np.int64)
        for i in range(self.n_particles):
            r = self.n_particles - i
            x = tuples[:, i]
            ranks += self._comb_table[self.d - prev - 1, r] - self._comb_table[self.d - x, r]
            prev = x
        return ranks

    def unrank(self, index: int) -> tuple:
        if index < 0 or index >= self.dimension:
            raise InvalidArgumentError(
                f"インデックスが範囲 [0, {self.dimension}) の外です: {index}"
            )
        return tuple(int(x) for x in self.states[index])


@dataclass(frozen=True)
class WaveFunction:
    """
    FockBasis 上の第二量子化係数 C_X。
    順序付きの引数での値は f(x_1,...,x_N) = C_X / sqrt(N!)、それ以外は反対称性で拡張する。
    """

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).ravel()
        if amps.shape[0] != self.basis.dimension:
            raise DimensionMismatchError(
                f"振幅の長さ {amps.shape[0]} が基底の次元 {self.basis.dimension} と一致しません。"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def n_particles(self) -> int:
        return self.basis.n_particles

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "WaveFunction":
        norm = self.norm()
        if norm == 0.0:
            raise DegenerateStateError("ゼロベクトルは正規化できません。")
        return WaveFunction(self.basis, self.amplitudes / norm)

    def with_phase_fixed(self) -> "WaveFunction":
        """絶対値最大の振幅が正の実数になるよう全体位相を固定する"""
        return WaveFunction(self.basis, fix_phase(self.amplitudes))


def fix_phase(vector: np.ndarray) -> np.ndarray:
    """絶対値最大の成分が正の実数になるように位相を揃える (同値なら先頭を採用)"""
    vector = np.asarray(vector, dtype=np.complex128)
    if vector.size == 0:
        return vector
    k = int(np.argmax(np.abs(vector)))
    if np.abs(vector[k]) == 0.0:
        return vector.copy()
    return vector * (np.abs(vector[k]) / vector[k])


# --- 操作API ---


def enumerate_basis(d: int, n: int) -> FockBasis:
    return FockBasis(d, n)


def rank(basis: FockBasis, tup) -> int:
    return basis.rank(tup)


def unrank(basis: FockBasis, index: int) -> tuple:
    return basis.unrank(index)


def permutation_sign(args) -> tuple[int, tuple]:
    """引数列をソートする置換の符号とソート結果を返す。重複があれば符号 0"""
    args = list(args)
    if len(set(args)) != len(args):
        return 0, tuple(sorted(args))
    sign = 1
    work = args[:]
    # 挿入ソートで転置の回数を数える
    for i in range(1, len(work)):
        j = i
        while j > 0 and work[j - 1] > work[j]:
            work[j - 1], work[j] = work[j], work[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(work)


def pointwise_value(f: WaveFunction, args) -> complex:
    """f(x_1,...,x_N) を任意の順序の引数で評価する"""
    args = tuple(int(x) for x in args)
    if len(args) != f.n_particles:
        raise InvalidArgumentError(f"引数の数は {f.n_particles} である必要があります: {args}")
    if any(x < 0 or x >= f.d for x in args):
        raise InvalidArgumentError(f"引数が範囲 [0, {f.d}) の外です: {args}")
    sign, ordered = permutation_sign(args)
    if sign == 0:
        return 0j
    index = f.basis.rank(ordered)
    return complex(sign * f.amplitudes[index] / math.sqrt(math.factorial(f.n_particles)))


def inner(f: WaveFunction, g: WaveFunction) -> complex:
    """<f|g>"""
    if f.basis != g.basis:
        raise DimensionMismatchError(f"基底が一致しません: {f.basis} と {g.basis}")
    return complex(np.vdot(f.amplitudes, g.amplitudes))


def slater_amplitudes(basis: FockBasis, orbitals: np.ndarray) -> np.ndarray:
    """列 orbitals (d×N) の Slater 行列式の係数 det(V[X, :]) を返す"""
    orbitals = np.asarray(orbitals, dtype=np.complex128)
    if orbitals.shape != (basis.d, basis.n_particles):
        raise DimensionMismatchError(
            f"軌道行列の形 {orbitals.shape} が ({basis.d}, {basis.n_particles}) と一致しません。"
        )

    def block(start, stop):
        return np.linalg.det(orbitals[basis.states[start:stop]])

    return np.concatenate(map_blocks(basis.dimension, block))


def slater_wavefunction(basis: FockBasis, orbitals: np.ndarray) -> WaveFunction:
    return WaveFunction(basis, slater_amplitudes(basis, orbitals)).normalized()


def random_wavefunction(basis: FockBasis, seed: int) -> WaveFunction:
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(basis.dimension)
    return WaveFunction(basis, amps).normalized()


def embed(f: WaveFunction, target: FockBasis) -> WaveFunction:
    """小さい一粒子空間の状態を、先頭 d サイトとして大きい基底に埋め込む"""
    if target.n_particles != f.n_particles or target.d < f.d:
        raise DimensionMismatchError(f"{f.basis} を {target} に埋め込めません。")
    amps = np.zeros(target.dimension, dtype=np.complex128)
    amps[target.rank_many(f.basis.states)] = f.amplitudes
    return WaveFunction(target, amps)


# --- ブロック並列 ---


def map_blocks(n_items: int, fn, block_size: int | None = None, workers: int | None = None) -> list:
    """
    [0, n_items) をブロックに分割し fn(start, stop) を評価する。
    結果は常にブロック順で返すので、ワーカー数によらず同じ和になる。
    """
    block_size = block_size or config_engine.get_block_size()
    workers = workers or config_engine.get_workers()
    bounds = [(s, min(s + block_size, n_items)) for s in range(0, n_items, block_size)]
    if not bounds:
        return []
    if workers <= 1 or len(bounds) == 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def ordered_sum(parts: list):
    """部分和を固定順で足し合わせる"""
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total
