import math
import itertools

import numpy as np

import fock_core
from fock_core import FockBasis, WaveFunction
from errors import InvalidDimensionError, InvalidTupleError, InvalidArgumentError, DimensionMismatchError
from testkit import raises, random_unitary_columns


def test_basis_dimension_and_order():
    basis = FockBasis(6, 3)
    assert basis.dimension == math.comb(6, 3), "基底の次元が C(d,n) ではありません"
    tuples = [tuple(s) for s in basis.states]
    assert tuples == sorted(tuples), "基底が辞書式順序ではありません"
    assert tuples[0] == (0, 1, 2) and tuples[-1] == (3, 4, 5), "先頭または末尾のタプルが不正です"
    assert all(a < b for tup in tuples for a, b in zip(tup, tup[1:])), "タプルが昇順ではありません"


def test_basis_edge_cases():
    assert FockBasis(4, 4).dimension == 1, "d=n の基底は1状態のはずです"
    assert FockBasis(5, 1).dimension == 5, "n=1 の基底は d 状態のはずです"
    assert raises(InvalidDimensionError, FockBasis, 3, 4), "n > d が拒否されませんでした"
    assert raises(InvalidDimensionError, FockBasis, 3, 0), "n = 0 が拒否されませんでした"


def test_rank_unrank_inverse():
    basis = FockBasis(7, 3)
    for index in range(basis.dimension):
        assert basis.rank(basis.unrank(index)) == index, f"rank(unrank({index})) が一致しません"
    assert basis.rank((0, 1, 2)) == 0, "(0,1,2) の rank は 0 のはずです"
    assert basis.rank((4, 5, 6)) == basis.dimension - 1, "最後のタプルの rank が不正です"
    ranks = basis.rank_many(basis.states)
    assert np.array_equal(ranks, np.arange(basis.dimension)), "rank_many が列挙順と一致しません"
    assert raises(InvalidArgumentError, basis.unrank, basis.dimension), "範囲外の unrank が拒否されませんでした"


def test_rank_rejects_invalid_tuples():
    basis = FockBasis(5, 2)
    assert raises(InvalidTupleError, basis.rank, (2, 1)), "降順のタプルが拒否されませんでした"
    assert raises(InvalidTupleError, basis.rank, (1, 1)), "重複したタプルが拒否されませんでした"
    assert raises(InvalidTupleError, basis.rank, (0, 5)), "範囲外のタプルが拒否されませんでした"
    assert raises(InvalidTupleError, basis.rank, (0, 1, 2)), "長さの違うタプルが拒否されませんでした"


def test_pointwise_value_antisymmetry():
    basis = FockBasis(5, 3)
    f = fock_core.random_wavefunction(basis, seed=3)
    value = fock_core.pointwise_value(f, (1, 3, 4))
    assert np.isclose(value, f.amplitudes[basis.rank((1, 3, 4))] / math.sqrt(6)), "f = C_X/sqrt(N!) ではありません"
    assert np.isclose(fock_core.pointwise_value(f, (3, 1, 4)), -value), "互換で符号が反転しません"
    assert np.isclose(fock_core.pointwise_value(f, (4, 1, 3)), value), "巡回置換で符号が変わりました"
    assert fock_core.pointwise_value(f, (1, 1, 4)) == 0, "重複した引数で 0 になりません"


def test_first_quantized_normalization():
    basis = FockBasis(5, 3)
    f = fock_core.random_wavefunction(basis, seed=11)
    total = sum(
        abs(fock_core.pointwise_value(f, args)) ** 2
        for args in itertools.product(range(5), repeat=3)
    )
    assert abs(total - 1.0) < 1e-12, f"順序付き引数での和が 1 ではありません: {total}"


def test_permutation_sign():
    assert fock_core.permutation_sign((0, 1, 2)) == (1, (0, 1, 2)), "恒等置換の符号が不正です"
    assert fock_core.permutation_sign((1, 0, 2)) == (-1, (0, 1, 2)), "互換の符号が不正です"
    assert fock_core.permutation_sign((2, 0, 1))[0] == 1, "巡回置換の符号が不正です"
    assert fock_core.permutation_sign((2, 2))[0] == 0, "重複で符号 0 になりません"


def test_slater_wavefunction_is_normalized():
    rng = np.random.default_rng(5)
    basis = FockBasis(7, 3)
    orbitals = random_unitary_columns(7, 3, rng)
    amps = fock_core.slater_amplitudes(basis, orbitals)
    assert abs(np.linalg.norm(amps) - 1.0) < 1e-12, "正規直交軌道の Slater 行列式のノルムが 1 ではありません"
    f = fock_core.slater_wavefunction(basis, orbitals)
    assert f.is_normalized(), "slater_wavefunction が正規化されていません"


def test_wavefunction_validation_and_inner():
    basis = FockBasis(4, 2)
    assert raises(DimensionMismatchError, WaveFunction, basis, np.ones(5)), "長さの違う振幅が拒否されませんでした"
    f = fock_core.random_wavefunction(basis, seed=1)
    g = fock_core.random_wavefunction(FockBasis(5, 2), seed=1)
    assert raises(DimensionMismatchError, fock_core.inner, f, g), "基底の違う内積が拒否されませんでした"
    assert abs(fock_core.inner(f, f) - 1.0) < 1e-12, "<f|f> が 1 ではありません"
    again = fock_core.random_wavefunction(basis, seed=1)
    assert np.array_equal(f.amplitudes, again.amplitudes), "同じシードで同じ状態になりません"


def test_fix_phase():
    v = np.array([0.1, -0.5j, 0.3])
    fixed = fock_core.fix_phase(v)
    assert np.isclose(fixed[1], 0.5) and abs(fixed[1].imag) < 1e-15, "絶対値最大の成分が正の実数になりません"
    assert np.allclose(np.abs(fixed), np.abs(v)), "絶対値が変わりました"


def test_embed_keeps_amplitudes():
    small = fock_core.random_wavefunction(FockBasis(4, 2), seed=2)
    large = fock_core.embed(small, FockBasis(6, 2))
    assert abs(large.norm() - 1.0) < 1e-12, "埋め込み後のノルムが 1 ではありません"
    assert large.amplitudes[large.basis.rank((0, 3))] == small.amplitudes[small.basis.rank((0, 3))], "係数が移っていません"
    assert large.amplitudes[large.basis.rank((0, 5))] == 0, "左端以外に重みがあります"


def test_map_blocks_is_independent_of_workers():
    values = np.random.default_rng(0).standard_normal(1000)

    def block(start, stop):
        return np.sum(values[start:stop])

    serial = fock_core.ordered_sum(fock_core.map_blocks(len(values), block, block_size=37, workers=1))
    threaded = fock_core.ordered_sum(fock_core.map_blocks(len(values), block, block_size=37, workers=4))
    assert serial == threaded, "ワーカー数によって和が変わりました"
