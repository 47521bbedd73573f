"""Layered Hopfield networks and their equilibrium (DEQ) maps.

Two variants share one parameterization:

  CHN   state-level equilibrium, velocity  -s + rho'(s) * (W rho(s) + b)
  HAM   activation-level equilibrium,      -s + W rho(s) + b

The full coupling matrix W is block-tridiagonal: layer i talks only to
layers i-1 and i+1, through the interface matrix blocks[i] of shape
(n_{i+1} x n_i) and its transpose.  States are stored hidden-only (the
"tilde" form): the clamped input x enters through the first interface as
a constant drive U rho(x), with U = blocks[0] zero-padded to the hidden
layers below it.  Fixed points of the maps here are exactly the zero-velocity
states of the corresponding energies.

All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .nonlin import Nonlinearity, shifted_sigmoid

CHN = "chn"
HAM = "ham"


@dataclass(frozen=True)
class Architecture:
    """Layer sizes [d, n_1, ..., n_{L-1}]; layer 0 is the input."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input layer and one hidden layer")
        if any(n < 1 for n in sizes):
            raise ValueError(f"all layer sizes must be >= 1, got {sizes}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.layer_sizes[1:]

    @property
    def state_dim(self) -> int:
        """N = total hidden units; the length of a state vector."""
        return sum(self.hidden_sizes)

    @property
    def hidden_layers(self) -> range:
        return range(1, self.num_layers)

    def hidden_slice(self, i: int) -> slice:
        """Contiguous slice of hidden layer i (1-based) in the flat state."""
        if not 1 <= i < self.num_layers:
            raise ValueError(f"hidden layer index {i} out of range")
        off = sum(self.layer_sizes[1:i])
        return slice(off, off + self.layer_sizes[i])

    @property
    def even_layers(self) -> tuple[int, ...]:
        return tuple(i for i in self.hidden_layers if i % 2 == 0)

    @property
    def odd_layers(self) -> tuple[int, ...]:
        return tuple(i for i in self.hidden_layers if i % 2 == 1)

    def layer_indices(self, layers: Sequence[int]) -> np.ndarray:
        """Flat state indices of the given hidden layers, in order."""
        parts = [np.arange(self.hidden_slice(i).start, self.hidden_slice(i).stop) for i in layers]
        if not parts:
            return np.empty(0, dtype=np.intp)
        return np.concatenate(parts)

    @property
    def even_indices(self) -> np.ndarray:
        return self.layer_indices(self.even_layers)

    @property
    def odd_indices(self) -> np.ndarray:
        return self.layer_indices(self.odd_layers)

    @property
    def output_layer(self) -> int:
        return self.num_layers - 1

    def output_slice(self) -> slice:
        return self.hidden_slice(self.output_layer)


@dataclass(frozen=True)
class StateVector:
    """A flat hidden state plus its layer layout."""

    values: np.ndarray
    arch: Architecture

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.arch.state_dim,):
            raise ValueError(f"state has shape {v.shape}, expected ({self.arch.state_dim},)")
        object.__setattr__(self, "values", v)

    def layer(self, i: int) -> np.ndarray:
        return self.values[self.arch.hidden_slice(i)]

    @property
    def even(self) -> np.ndarray:
        return self.values[self.arch.even_indices]

    @property
    def odd(self) -> np.ndarray:
        return self.values[self.arch.odd_indices]


def zeros_state(arch: Architecture) -> np.ndarray:
    return np.zeros(arch.state_dim, dtype=np.float64)


@dataclass
class ModelParams:
    """Interface matrices, hidden biases, and the model variant.

    blocks[i] has shape (n_{i+1} x n_i) and connects layer i to layer i+1;
    blocks[0] is the input map U.  biases[i] belongs to hidden layer i+1.
    Symmetry of the full W is structural: the same block serves both
    directions, once plain and once transposed.
    """

    arch: Architecture
    blocks: list[np.ndarray]
    biases: list[np.ndarray]
    variant: str
    nonlin: Nonlinearity = field(default_factory=shifted_sigmoid)

    def __post_init__(self):
        if self.variant not in (CHN, HAM):
            raise ValueError(f"unknown variant {self.variant!r}")
        sizes = self.arch.layer_sizes
        L = self.arch.num_layers
        if len(self.blocks) != L - 1 or len(self.biases) != L - 1:
            raise ValueError(f"expected {L - 1} blocks and biases for {L} layers")
        self.blocks = [np.ascontiguousarray(b, dtype=np.float64) for b in self.blocks]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        for i, b in enumerate(self.blocks):
            want = (sizes[i + 1], sizes[i])
            if b.shape != want:
                raise ValueError(f"blocks[{i}] has shape {b.shape}, expected {want}")
        for i, b in enumerate(self.biases):
            if b.shape != (sizes[i + 1],):
                raise ValueError(f"biases[{i}] has shape {b.shape}, expected ({sizes[i + 1]},)")

    def bias(self, i: int) -> np.ndarray:
        """Bias of hidden layer i (1-based)."""
        return self.biases[i - 1]

    def biases_flat(self) -> np.ndarray:
        return np.concatenate(self.biases)

    def copy(self) -> "ModelParams":
        return ModelParams(
            arch=self.arch,
            blocks=[b.copy() for b in self.blocks],
            biases=[b.copy() for b in self.biases],
            variant=self.variant,
            nonlin=self.nonlin,
        )


def _as_state(s, arch: Architecture) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape[-1] != arch.state_dim:
        raise ValueError(f"state has last dimension {s.shape[-1]}, expected {arch.state_dim}")
    return s


def input_drive(p: ModelParams, x) -> np.ndarray:
    """U rho(x), the constant drive the clamped input exerts on layer 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.arch.input_dim:
        raise ValueError(f"input has last dimension {x.shape[-1]}, expected {p.arch.input_dim}")
    return p.nonlin.evaluate(x) @ p.blocks[0].T


def layer_affine(p: ModelParams, s: np.ndarray, ux: np.ndarray, i: int) -> np.ndarray:
    """(W rho(s) + b + U rho(x)) restricted to hidden layer i.

    This is the single update kernel shared by the synchronous map and the
    even-odd steps; sharing it makes their algebraic equality hold bitwise.
    """
    arch, nl = p.arch, p.nonlin
    if i == 1:
        acc = ux
    else:
        below = arch.hidden_slice(i - 1)
        acc = nl.evaluate(s[..., below]) @ p.blocks[i - 1].T
    if i < arch.num_layers - 1:
        above = arch.hidden_slice(i + 1)
        acc = acc + nl.evaluate(s[..., above]) @ p.blocks[i]
    return acc + p.biases[i - 1]


def ham_affine(p: ModelParams, s: np.ndarray, ux: np.ndarray) -> np.ndarray:
    """W rho(s) + b + U rho(x) over all hidden layers (the HAM map)."""
    out = np.empty_like(s)
    for i in p.arch.hidden_layers:
        out[..., p.arch.hidden_slice(i)] = layer_affine(p, s, ux, i)
    return out


def ham_deq_map(s, p: ModelParams, x) -> np.ndarray:
    """One synchronous application of the HAM fixed-point map (Eq. s <- W rho(s)+b+U rho(x))."""
    s = _as_state(s, p.arch)
    return ham_affine(p, s, input_drive(p, x))


def chn_deq_map(s, p: ModelParams, x) -> np.ndarray:
    """One synchronous application of the CHN map, rho'(s) * (W rho(s)+b+U rho(x))."""
    s = _as_state(s, p.arch)
    return p.nonlin.derivative(s) * ham_affine(p, s, input_drive(p, x))


def ham_velocity(s, p: ModelParams, x) -> np.ndarray:
    """-s + W rho(s) + b + U rho(x); equals -dE/d(rho(s)) on hidden coordinates."""
    s = _as_state(s, p.arch)
    return ham_deq_map(s, p, x) - s


def chn_velocity(s, p: ModelParams, x) -> np.ndarray:
    """-s + rho'(s)*(W rho(s)+b+U rho(x)); equals -dE/ds on hidden coordinates."""
    s = _as_state(s, p.arch)
    return chn_deq_map(s, p, x) - s


def wtilde_matvec(p: ModelParams, v: np.ndarray) -> np.ndarray:
    """The hidden-hidden coupling W~ applied to a flat vector (no bias, no input)."""
    arch = p.arch
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    for i in arch.hidden_layers:
        sl = arch.hidden_slice(i)
        acc = None
        if i >= 2:
            below = arch.hidden_slice(i - 1)
            acc = v[..., below] @ p.blocks[i - 1].T
        if i < arch.num_layers - 1:
            above = arch.hidden_slice(i + 1)
            up = v[..., above] @ p.blocks[i]
            acc = up if acc is None else acc + up
        if acc is not None:
            out[..., sl] = acc
    return out


def _padded_drive(p: ModelParams, ux: np.ndarray) -> np.ndarray:
    arch = p.arch
    out = np.zeros(ux.shape[:-1] + (arch.state_dim,), dtype=np.float64)
    out[..., arch.hidden_slice(1)] = ux
    return out


def energy_chn(s, p: ModelParams, x):
    """CHN energy on the hidden state with the input clamped at x.

    E = ||s||^2/2 - rho(s)^T W~ rho(s)/2 - (b + U rho(x))^T rho(s).
    Terms depending only on the clamped input are constants and omitted.
    """
    if p.variant != CHN:
        raise ValueError(f"energy_chn needs a CHN model, got variant {p.variant!r}")
    s = _as_state(s, p.arch)
    r = p.nonlin.evaluate(s)
    drive = p.biases_flat() + _padded_drive(p, input_drive(p, x))
    e = 0.5 * np.sum(s * s, axis=-1)
    e = e - 0.5 * np.sum(r * wtilde_matvec(p, r), axis=-1)
    e = e - np.sum(drive * r, axis=-1)
    return float(e) if e.ndim == 0 else e


def energy_ham(s, p: ModelParams, x):
    """HAM energy: s^T rho(s) - L(s) - rho^T W~ rho/2 - (b + U rho(x))^T rho."""
    if p.variant != HAM:
        raise ValueError(f"energy_ham needs a HAM model, got variant {p.variant!r}")
    s = _as_state(s, p.arch)
    r = p.nonlin.evaluate(s)
    drive = p.biases_flat() + _padded_drive(p, input_drive(p, x))
    e = np.sum(s * r, axis=-1) - np.sum(p.nonlin.antiderivative(s), axis=-1)
    e = e - 0.5 * np.sum(r * wtilde_matvec(p, r), axis=-1)
    e = e - np.sum(drive * r, axis=-1)
    return float(e) if e.ndim == 0 else e


def dense_wtilde(p: ModelParams) -> np.ndarray:
    """W~ as an explicit (N x N) symmetric block-tridiagonal matrix."""
    arch = p.arch
    n = arch.state_dim
    w = np.zeros((n, n), dtype=np.float64)
    for i in arch.hidden_layers:
        if i < arch.num_layers - 1:
            lo, hi = arch.hidden_slice(i), arch.hidden_slice(i + 1)
            w[lo, hi] = p.blocks[i].T
            w[hi, lo] = p.blocks[i]
    return w


def dense_u(p: ModelParams) -> np.ndarray:
    """U = blocks[0] zero-padded to all hidden layers, shape (N x d)."""
    arch = p.arch
    u = np.zeros((arch.state_dim, arch.input_dim), dtype=np.float64)
    u[arch.hidden_slice(1)] = p.blocks[0]
    return u
