import numpy as np

import closed_forms
from fock_core import FockBasis, WaveFunction, random_wavefunction, slater_wavefunction
from lattice_engine import ChainSpec, ground_state, density
from errors import InvalidArgumentError, DimensionMismatchError, DegenerateStateError
from testkit import raises, random_unitary_columns


def _pair_state(basis, orbitals, weights):
    """Σ_α sqrt(w_α) ψ_{2α-1} ∧ ψ_{2α}"""
    amps = np.zeros(basis.dimension, dtype=np.complex128)
    for k, w in enumerate(weights):
        amps += np.sqrt(w) * slater_wavefunction(basis, orbitals[:, 2 * k : 2 * k + 2]).amplitudes
    return WaveFunction(basis, amps)


def test_rdm_of_slater_is_projector():
    rng = np.random.default_rng(0)
    orbitals = random_unitary_columns(7, 3, rng)
    f = slater_wavefunction(FockBasis(7, 3), orbitals)
    rdm = closed_forms.one_particle_rdm(f)
    assert np.allclose(rdm.matrix, orbitals @ orbitals.conj().T, atol=1e-12), "Slater 行列式の ρ1 が射影演算子ではありません"
    assert np.allclose(rdm.eigenvalues(), [1, 1, 1, 0, 0, 0, 0], atol=1e-12), "固有値が {1×N, 0×(d-N)} ではありません"


def test_rdm_two_fermion_formula():
    basis = FockBasis(6, 2)
    f = random_wavefunction(basis, seed=1)
    # f(x1, x2) の反対称行列
    fm = np.zeros((6, 6), dtype=np.complex128)
    for (x1, x2), c in zip(basis.states, f.amplitudes):
        fm[x1, x2] = c / np.sqrt(2)
        fm[x2, x1] = -c / np.sqrt(2)
    rdm = closed_forms.one_particle_rdm(f)
    assert np.allclose(rdm.matrix, 2 * fm.T @ fm.conj(), atol=1e-12), "N=2 の ρ1 が 2 f^T f^* と一致しません"


def test_rdm_diagonal_is_density():
    f = random_wavefunction(FockBasis(7, 3), seed=2)
    rdm = closed_forms.one_particle_rdm(f)
    assert np.allclose(np.diag(rdm.matrix).real, density(f), atol=1e-12), "ρ1 の対角が密度と一致しません"
    assert abs(rdm.trace - 3.0) < 1e-12, "ρ1 のトレースが N ではありません"
    single = closed_forms.one_particle_rdm(random_wavefunction(FockBasis(5, 1), seed=3))
    assert abs(single.trace - 1.0) < 1e-12, "N=1 の ρ1 のトレースが 1 ではありません"


def test_two_fermion_eigenvalues_are_paired():
    f = random_wavefunction(FockBasis(8, 2), seed=4)
    occupations = closed_forms.one_particle_rdm(f).eigenvalues()
    assert np.allclose(occupations[0::2], occupations[1::2], atol=1e-8), "N=2 の占有数が縮退したペアになりません"


def test_natural_orbitals_phase_convention():
    f = random_wavefunction(FockBasis(6, 2), seed=5)
    values, vectors = closed_forms.natural_orbitals(closed_forms.one_particle_rdm(f))
    assert np.all(np.diff(values) <= 1e-12), "占有数が降順ではありません"
    for k in range(vectors.shape[1]):
        first = vectors[np.nonzero(np.abs(vectors[:, k]) > 1e-12)[0][0], k]
        assert first.real > 0 and abs(first.imag) < 1e-12, "最初の非零成分が正の実数ではありません"


def test_imax_two_fermion_examples():
    rng = np.random.default_rng(6)
    basis = FockBasis(6, 2)
    orbitals = random_unitary_columns(6, 4, rng)
    pair = _pair_state(basis, orbitals, [1.0])
    assert abs(closed_forms.imax_two_fermion(pair, 2).value - 1.0) < 1e-12, "Slater ペアで I_max=1 になりません"
    mixed = _pair_state(basis, orbitals, [0.8, 0.2])
    result = closed_forms.imax_two_fermion(mixed, 2)
    assert abs(result.value - 0.8) < 1e-12, f"M=2 で I_max=0.8 になりません: {result.value}"
    assert abs(closed_forms.imax_two_fermion(mixed, 4).value - 1.0) < 1e-12, "M=4 で I_max=1 になりません"
    assert np.allclose(result.pair_occupations[:2], [0.8, 0.2], atol=1e-12), "C_α が読み取れません"
    assert result.orbitals.shape == (6, 2), "最適軌道の数が M ではありません"


def test_imax_two_fermion_rejects_bad_input():
    f = random_wavefunction(FockBasis(6, 2), seed=7)
    assert raises(InvalidArgumentError, closed_forms.imax_two_fermion, f, 3), "奇数の M が拒否されませんでした"
    assert raises(InvalidArgumentError, closed_forms.imax_two_fermion, f, 8), "M > d が拒否されませんでした"
    g = random_wavefunction(FockBasis(6, 3), seed=7)
    assert raises(InvalidArgumentError, closed_forms.imax_two_fermion, g, 4), "N=3 が拒否されませんでした"


def test_imax_two_boson():
    rng = np.random.default_rng(8)
    psi = random_unitary_columns(4, 2, rng)
    condensate = np.outer(psi[:, 0], psi[:, 0])
    assert abs(closed_forms.imax_two_boson(condensate, 1).value - 1.0) < 1e-12, "凝縮状態で I_max=1 になりません"
    b = np.sqrt(0.6) * np.outer(psi[:, 0], psi[:, 0]) + np.sqrt(0.4) * np.outer(psi[:, 1], psi[:, 1])
    result = closed_forms.imax_two_boson(b, 1)
    assert abs(result.value - 0.6) < 1e-12, f"D=(0.6,0.4), M=1 で 0.6 になりません: {result.value}"
    assert np.allclose(result.occupations[:2], [0.6, 0.4], atol=1e-12), "D_α が読み取れません"
    assert raises(InvalidArgumentError, closed_forms.imax_two_boson, np.triu(np.ones((3, 3))), 1), "非対称な b が拒否されませんでした"


def test_imax_two_boson_against_subspace_search():
    rng = np.random.default_rng(9)
    z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = z + z.T
    b /= np.linalg.norm(b)
    closed = closed_forms.imax_two_boson(b, 2).value
    best = 0.0
    # d=3 の2次元部分空間は直交補空間の単位ベクトル n で決まる
    for _ in range(20000):
        n = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        n /= np.linalg.norm(n)
        projector = np.eye(3) - np.outer(n, n.conj())
        value = np.linalg.norm(projector @ b @ projector.T) ** 2
        assert value <= closed + 1e-12, "部分空間の探索が閉形式を超えました"
        best = max(best, value)
    assert closed - best < 3e-2, f"探索の最大値 {best} が閉形式 {closed} に近づきません"


def test_upper_bound_properties():
    f = random_wavefunction(FockBasis(7, 3), seed=10)
    bounds = [closed_forms.upper_bound(f, m) for m in range(1, 8)]
    assert all(b >= a - 1e-15 for a, b in zip(bounds, bounds[1:])), "上限が M について単調ではありません"
    assert bounds[-1] == 1.0, "M=d で上限が 1 になりません"
    assert all(0.0 <= b <= 1.0 for b in bounds), "上限が [0, 1] の外です"
    slater = slater_wavefunction(FockBasis(7, 3), random_unitary_columns(7, 3, np.random.default_rng(11)))
    assert abs(closed_forms.upper_bound(slater, 3) - 1.0) < 1e-12, "Slater 行列式で M=N の上限が 1 になりません"
    assert raises(InvalidArgumentError, closed_forms.upper_bound, f, 8), "M > d が拒否されませんでした"


def test_hole_decomposition_random_state():
    for n in (1, 2, 3, 4):
        f = random_wavefunction(FockBasis(n + 1, n), seed=20 + n)
        result = closed_forms.hole_decomposition(f)
        assert result.reconstruction_error <= 1e-10, f"N={n}: 再構成誤差が大きすぎます ({result.reconstruction_error})"
        assert result.contraction_residual <= 1e-12, f"N={n}: 空孔軌道との縮約が 0 になりません"
        rdm = closed_forms.one_particle_rdm(f).matrix
        assert np.linalg.norm(rdm @ result.hole_orbital) < 1e-10, f"N={n}: 空孔軌道が ρ1 の核にありません"


def test_hole_decomposition_single_configuration():
    basis = FockBasis(4, 3)
    amps = np.zeros(basis.dimension, dtype=np.complex128)
    amps[basis.rank((1, 2, 3))] = 1.0
    result = closed_forms.hole_decomposition(WaveFunction(basis, amps))
    assert np.allclose(result.hole_orbital, [-1, 0, 0, 0]), "A=(1,0,...) で空孔軌道が -φ1 になりません"
    assert result.reconstruction_error <= 1e-10, "単一配置の再構成誤差が大きすぎます"


def test_hole_decomposition_of_chain_ground_states():
    for n in (2, 3, 4):
        for u in (-3.0, 1.0, 10.0):
            psi = ground_state(ChainSpec(n + 1, n, u))
            result = closed_forms.hole_decomposition(psi)
            assert result.reconstruction_error <= 1e-10, f"N={n}, U={u}: 基底状態が Slater 行列式になりません"


def test_hole_decomposition_rejects_bad_input():
    f = random_wavefunction(FockBasis(5, 3), seed=0)
    assert raises(DimensionMismatchError, closed_forms.hole_decomposition, f), "d != N+1 が拒否されませんでした"
    zero = WaveFunction(FockBasis(4, 3), np.zeros(4))
    assert raises(DegenerateStateError, closed_forms.hole_decomposition, zero), "f=0 が拒否されませんでした"


def test_density_distance_bound():
    f = random_wavefunction(FockBasis(7, 3), seed=30)
    same = closed_forms.density_distance_bound_check(f, f)
    assert same.epsilon < 1e-15 and same.delta1 < 1e-15 and same.bound_ok, "f2 = f1 で ε=δ1=0 になりません"
    rng = np.random.default_rng(31)
    for trial in range(200):
        noise = rng.standard_normal(f.basis.dimension) + 1j * rng.standard_normal(f.basis.dimension)
        scale = 10.0 ** rng.uniform(-6, -1)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        g = WaveFunction(f.basis, phase * (f.amplitudes + scale * noise)).normalized()
        check = closed_forms.density_distance_bound_check(f, g)
        assert check.bound_ok, f"試行 {trial}: δ1={check.delta1} > sqrt(8ε)={check.bound}"


def test_density_bound_for_nearly_equal_states():
    # ε ~ 1e-16 では 1 - |<f1|f2>| が 0 に丸められる
    f = random_wavefunction(FockBasis(6, 2), seed=32)
    rng = np.random.default_rng(33)
    for trial in range(50):
        noise = rng.standard_normal(f.basis.dimension) + 1j * rng.standard_normal(f.basis.dimension)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        g = WaveFunction(f.basis, phase * (f.amplitudes + 3e-9 * noise)).normalized()
        check = closed_forms.density_distance_bound_check(f, g)
        assert check.epsilon > 0.0, f"試行 {trial}: ε が 0 に丸められました"
        assert check.bound_ok, f"試行 {trial}: δ1={check.delta1} > sqrt(8ε)={check.bound}"
        overlap = abs(np.vdot(f.amplitudes, g.amplitudes))
        assert abs(check.epsilon - (1.0 - overlap)) < 1e-15, f"試行 {trial}: ε が 1-|<f1|f2>| と一致しません"


def test_bound_report_line():
    line = closed_forms.bound_report_line(3, 0.25, 0.5)
    assert line == "3, 0.25, 0.5", f"上限レコードの形式が不正です: {line}"
