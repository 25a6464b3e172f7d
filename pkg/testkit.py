"""テストで共有する補助関数と、独立な経路で計算する総当たりの参照実装"""

import math
import itertools

import numpy as np

from fock_core import FockBasis, WaveFunction, pointwise_value


def raises(exc_type, fn, *args, **kwargs) -> bool:
    """fn(*args) が exc_type を送出すれば True"""
    try:
        fn(*args, **kwargs)
    except exc_type:
        return True
    return False


def random_unitary_columns(d: int, m: int, rng) -> np.ndarray:
    z = rng.standard_normal((d, m)) + 1j * rng.standard_normal((d, m))
    q, _ = np.linalg.qr(z)
    return q


def jordan_wigner_hamiltonian(length: int, n_particles: int, interaction: float) -> np.ndarray:
    """
    2^L 次元の全 Fock 空間で Jordan-Wigner 変換によりハミルトニアンを作り、
    N 粒子セクタを辞書式順序の基底に制限する。
    サイト 0 が最上位ビット。|X> = c†_{x1}...c†_{xN}|0> は符号 +1 のビット列になる。
    """
    identity = np.eye(2)
    z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1| (空 <- 占有)

    def annihilator(j):
        factors = [z] * j + [lower] + [identity] * (length - j - 1)
        op = factors[0]
        for factor in factors[1:]:
            op = np.kron(op, factor)
        return op

    c = [annihilator(j) for j in range(length)]
    n = [op.T @ op for op in c]
    dim = 2**length
    h = np.zeros((dim, dim))
    for i in range(length - 1):
        hop = c[i].T @ c[i + 1]
        h -= hop + hop.T
        h += interaction * (n[i] @ n[i + 1])

    basis = FockBasis(length, n_particles)
    index = [sum(2 ** (length - 1 - int(x)) for x in tup) for tup in basis.states]
    return h[np.ix_(index, index)]


def brute_force_eta(f: WaveFunction, orbitals: np.ndarray, config) -> complex:
    """<f|S_J> を全ての順序付き引数の和として計算する"""
    n = f.n_particles
    scale = 1.0 / math.sqrt(math.factorial(n))
    columns = orbitals[:, list(config)]
    total = 0j
    for args in itertools.product(range(f.d), repeat=n):
        value = pointwise_value(f, args)
        if value == 0:
            continue
        total += np.conj(value) * scale * np.linalg.det(columns[list(args), :])
    return complex(total)


def brute_force_g(f: WaveFunction, partners: np.ndarray) -> np.ndarray:
    """g(x) = N/sqrt(N!) Σ_{x2..xN} f(x, x2, ..., xN) conj(det P[(x2..xN), :])"""
    n = f.n_particles
    prefactor = n / math.sqrt(math.factorial(n))
    g = np.zeros(f.d, dtype=np.complex128)
    for x in range(f.d):
        for rest in itertools.product(range(f.d), repeat=n - 1):
            value = pointwise_value(f, (x,) + rest)
            if value == 0:
                continue
            minor = np.linalg.det(partners[list(rest), :]) if n > 1 else 1.0
            g[x] += prefactor * value * np.conj(minor)
    return g
