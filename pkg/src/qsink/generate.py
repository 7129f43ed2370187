"""Seeded random and named problem instances.

Seed protocol: every generator takes an integer seed (or a ``numpy``
Generator) and draws, in order, the Hamiltonian and then the marginals
slot by slot, so the same seed always yields the same instance.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import unitary_group

from . import linalg
from .tensor import TensorShape, kronecker_sum, partial_trace

#: added to squared-Gaussian spectra so random marginals stay well inside the PD cone
SPECTRUM_FLOOR = 0.05

NAMED = ("zero", "diagonal", "swap", "gibbs", "random")


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_hermitian(dim: int, norm: float = 1.0, seed=None, real_diagonal: bool = False) -> np.ndarray:
    """Symmetrized complex Gaussian matrix rescaled to operator norm `norm`.

    With ``real_diagonal`` only a random real diagonal is drawn.
    """
    rng = _rng(seed)
    if real_diagonal:
        a = np.diag(rng.standard_normal(dim)).astype(complex)
    else:
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        a = 0.5 * (g + g.conj().T)
    scale = linalg.op_norm(a)
    if norm == 0 or scale == 0:
        return np.zeros((dim, dim), dtype=complex)
    return a * (norm / scale)


def random_spectrum(dim: int, seed=None, floor: float = SPECTRUM_FLOOR) -> np.ndarray:
    rng = _rng(seed)
    w = rng.standard_normal(dim) ** 2 + floor
    return w / w.sum()


def random_density(dim: int, seed=None, diagonal: bool = False, floor: float = SPECTRUM_FLOOR) -> np.ndarray:
    """Strictly positive density matrix; a random unitary rotation unless `diagonal`."""
    rng = _rng(seed)
    w = random_spectrum(dim, rng, floor)
    if diagonal or dim == 1:
        return np.diag(w).astype(complex)
    u = unitary_group.rvs(dim, random_state=rng)
    g = (u * w) @ u.conj().T
    return 0.5 * (g + g.conj().T)


def density_with_top_eigenvalue(dim: int, top: float, seed=None) -> np.ndarray:
    """Random rotated density matrix whose largest eigenvalue is exactly `top`.

    The remaining mass ``1 - top`` is spread over the other eigenvalues
    (randomly, or uniformly if the random split would exceed `top`).
    Requires ``1/dim <= top <= 1``.
    """
    if not 1.0 / dim - 1e-15 <= top <= 1.0:
        raise ValueError(f"top eigenvalue must lie in [1/{dim}, 1], got {top}")
    rng = _rng(seed)
    w = np.empty(dim)
    w[0] = top
    if dim > 1:
        rest = random_spectrum(dim - 1, rng)
        rest = (1.0 - top) * (0.5 * rest + 0.5 / (dim - 1))
        if rest.max() > top:
            rest = np.full(dim - 1, (1.0 - top) / (dim - 1))
        w[1:] = rest
    u = unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1))
    g = (u * w) @ u.conj().T
    return 0.5 * (g + g.conj().T)


def swap_operator(d: int) -> np.ndarray:
    """The flip ``x (x) y -> y (x) x`` on ``C^d (x) C^d``."""
    s = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            s[b * d + a, a * d + b] = 1.0
    return s


def gibbs_state(h: np.ndarray, epsilon: float) -> np.ndarray:
    w, v = linalg.eigh(h)
    p = np.exp(-(w - w[0]) / epsilon)
    p /= p.sum()
    return (v * p) @ v.conj().T


def random_instance(dims, epsilon: float = 1.0, hnorm: float = 1.0, seed=None) -> dict:
    """Raw ingredients ``{"marginals", "hamiltonian", "epsilon", "dims"}`` of a random instance."""
    rng = _rng(seed)
    shape = TensorShape(tuple(dims))
    h = random_hermitian(shape.total, hnorm, rng)
    marginals = [random_density(d, rng) for d in shape.dims]
    return {"dims": list(shape.dims), "epsilon": float(epsilon), "hamiltonian": h, "marginals": marginals}


def named_instance(name: str, dims=(2, 2), epsilon: float = 1.0, hnorm: float = 1.0, seed=None) -> dict:
    """Instances with known structure.

    ``zero``: H = 0 and random marginals. ``diagonal``: diagonal H and
    marginals (a classical transport problem). ``swap``: H a multiple of the
    flip operator (requires two equal factors). ``gibbs``: random H with the
    marginals of its Gibbs state. ``random``: as :func:`random_instance`.
    """
    rng = _rng(seed)
    shape = TensorShape(tuple(dims))
    if name == "random":
        return random_instance(shape.dims, epsilon, hnorm, rng)
    if name == "zero":
        h = np.zeros((shape.total, shape.total), dtype=complex)
        marginals = [random_density(d, rng) for d in shape.dims]
    elif name == "diagonal":
        h = random_hermitian(shape.total, hnorm, rng, real_diagonal=True)
        marginals = [random_density(d, rng, diagonal=True) for d in shape.dims]
    elif name == "swap":
        if shape.N != 2 or shape.dims[0] != shape.dims[1]:
            raise ValueError("the swap instance needs two factors of equal dimension")
        h = hnorm * swap_operator(shape.dims[0])
        marginals = [random_density(d, rng) for d in shape.dims]
    elif name == "gibbs":
        h = random_hermitian(shape.total, hnorm, rng)
        g = gibbs_state(h, epsilon)
        marginals = [partial_trace(i, g, shape) for i in range(shape.N)]
        marginals = [0.5 * (m + m.conj().T) / linalg.trace(m) for m in marginals]
    else:
        raise ValueError(f"unknown named instance {name!r}; choose from {', '.join(NAMED)}")
    return {"dims": list(shape.dims), "epsilon": float(epsilon), "hamiltonian": h, "marginals": marginals}


def symmetric_hamiltonian(d: int, N: int, norm: float = 1.0, seed=None) -> np.ndarray:
    """Random Hermitian H on ``(C^d)^N`` invariant under every slot permutation.

    Built as a one-body part plus a symmetrized two-body part, then rescaled.
    """
    rng = _rng(seed)
    shape = TensorShape((d,) * N)
    one = random_hermitian(d, 1.0, rng)
    h = kronecker_sum([one] * N, shape)
    if N >= 2:
        two = random_hermitian(d * d, 1.0, rng)
        two = 0.5 * (two + swap_operator(d) @ two @ swap_operator(d))
        tensor = two.reshape(d, d, d, d)
        for a in range(N):
            for b in range(a + 1, N):
                h += _pair_embed(tensor, a, b, d, N)
    scale = linalg.op_norm(h)
    return h * (norm / scale) if scale > 0 else h


def _pair_embed(tensor, a, b, d, N):
    """Embed a two-body operator acting on slots ``a < b``."""
    rest = N - 2
    eye = np.eye(d ** rest).reshape((d,) * (2 * rest)) if rest else np.ones(())
    # full operator indices: out slots 0..N-1, in slots N..2N-1
    letters = "abcdefghijklmnopqrstuvwxyz"
    out = list(letters[:N])
    inn = list(letters[N : 2 * N])
    others_out = [out[k] for k in range(N) if k not in (a, b)]
    others_in = [inn[k] for k in range(N) if k not in (a, b)]
    subscripts = (
        f"{out[a]}{out[b]}{inn[a]}{inn[b]},"
        f"{''.join(others_out)}{''.join(others_in)}->{''.join(out)}{''.join(inn)}"
    )
    full = np.einsum(subscripts, tensor, eye)
    return full.reshape(d**N, d**N)


def total_dim(dims) -> int:
    return math.prod(dims)
