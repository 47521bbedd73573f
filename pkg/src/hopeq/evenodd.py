"""Even-odd splitting of layered Hopfield networks.

The layered topology is bipartite: odd hidden layers (1, 3, ...) couple only
to even ones (2, 4, ...) and to the input.  Permuting the state to
[s_even; s_odd] turns the synchronous update into two half-updates through a
single coupling block W_P, and for HAMs the odd half can be eliminated
entirely, leaving a fixed-point map on the even half alone (the fused step).

Every step here evaluates the same per-layer kernel as the synchronous map,
in the same order, so the algebraic equalities between the schemes hold
bitwise, not just to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import HAM, ModelParams, input_drive, layer_affine


@dataclass
class EvenOddOperator:
    """Permutation and block layout for one model's even-odd split."""

    params: ModelParams
    even_layers: tuple[int, ...]
    odd_layers: tuple[int, ...]
    even_indices: np.ndarray
    odd_indices: np.ndarray
    w_p: np.ndarray      # odd <- even coupling, shape (n_odd x n_even)
    u_odd: np.ndarray    # input -> odd half, shape (n_odd x d)
    b_even: np.ndarray
    b_odd: np.ndarray

    @property
    def n_even(self) -> int:
        return self.even_indices.size

    @property
    def n_odd(self) -> int:
        return self.odd_indices.size

    def permute(self, s: np.ndarray) -> np.ndarray:
        """s -> [s_even; s_odd]."""
        s = np.asarray(s, dtype=np.float64)
        return np.concatenate([s[..., self.even_indices], s[..., self.odd_indices]], axis=-1)

    def unpermute(self, s_p: np.ndarray) -> np.ndarray:
        s_p = np.asarray(s_p, dtype=np.float64)
        out = np.empty_like(s_p)
        out[..., self.even_indices] = s_p[..., : self.n_even]
        out[..., self.odd_indices] = s_p[..., self.n_even :]
        return out

    def split(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=np.float64)
        return s[..., self.even_indices], s[..., self.odd_indices]

    def assemble(self, s_even: np.ndarray, s_odd: np.ndarray) -> np.ndarray:
        """Scatter the two halves back into layer order."""
        s_even = np.asarray(s_even, dtype=np.float64)
        s_odd = np.asarray(s_odd, dtype=np.float64)
        shape = np.broadcast_shapes(s_even.shape[:-1], s_odd.shape[:-1])
        out = np.empty(shape + (self.n_even + self.n_odd,), dtype=np.float64)
        out[..., self.even_indices] = s_even
        out[..., self.odd_indices] = s_odd
        return out

    def half_slice(self, i: int) -> slice:
        """Slice of hidden layer i within its own half vector."""
        layers = self.even_layers if i % 2 == 0 else self.odd_layers
        if i not in layers:
            raise ValueError(f"layer {i} is not a hidden layer of this operator")
        sizes = [self.params.arch.layer_sizes[j] for j in layers]
        k = layers.index(i)
        off = sum(sizes[:k])
        return slice(off, off + sizes[k])


def build_even_odd(p: ModelParams) -> EvenOddOperator:
    """Derive the permutation and the W_P / U_odd block layout (Theorem 1)."""
    arch = p.arch
    even_layers, odd_layers = arch.even_layers, arch.odd_layers
    even_idx, odd_idx = arch.even_indices, arch.odd_indices

    def half_offsets(layers):
        offs, acc = {}, 0
        for i in layers:
            offs[i] = acc
            acc += arch.layer_sizes[i]
        return offs, acc

    even_off, n_even = half_offsets(even_layers)
    odd_off, n_odd = half_offsets(odd_layers)

    w_p = np.zeros((n_odd, n_even), dtype=np.float64)
    for o in odd_layers:
        ro = slice(odd_off[o], odd_off[o] + arch.layer_sizes[o])
        for e in even_layers:
            ce = slice(even_off[e], even_off[e] + arch.layer_sizes[e])
            if e == o + 1:
                w_p[ro, ce] = p.blocks[o].T
            elif e == o - 1:
                w_p[ro, ce] = p.blocks[e]

    u_odd = np.zeros((n_odd, arch.input_dim), dtype=np.float64)
    if odd_layers:
        first = slice(odd_off[1], odd_off[1] + arch.layer_sizes[1])
        u_odd[first] = p.blocks[0]

    b_even = (
        np.concatenate([p.bias(i) for i in even_layers])
        if even_layers
        else np.empty(0, dtype=np.float64)
    )
    b_odd = (
        np.concatenate([p.bias(i) for i in odd_layers])
        if odd_layers
        else np.empty(0, dtype=np.float64)
    )

    return EvenOddOperator(
        params=p,
        even_layers=even_layers,
        odd_layers=odd_layers,
        even_indices=even_idx,
        odd_indices=odd_idx,
        w_p=w_p,
        u_odd=u_odd,
        b_even=b_even,
        b_odd=b_odd,
    )


def _check_halves(eo: EvenOddOperator, s_even, s_odd):
    s_even = np.asarray(s_even, dtype=np.float64)
    s_odd = np.asarray(s_odd, dtype=np.float64)
    if s_even.shape[-1] != eo.n_even or s_odd.shape[-1] != eo.n_odd:
        raise ValueError(
            f"half shapes {s_even.shape[-1]}/{s_odd.shape[-1]} do not match "
            f"partition {eo.n_even}/{eo.n_odd}"
        )
    return s_even, s_odd


def half_affine(
    eo: EvenOddOperator, s_full: np.ndarray, ux: np.ndarray | None, which: str
) -> np.ndarray:
    """The affine update (W rho + b + U rho(x)) for one half, via the shared kernel.

    ux may be None for the even half, which layer 1 (the only input-driven
    layer) never belongs to.
    """
    layers = eo.even_layers if which == "even" else eo.odd_layers
    p = eo.params
    if not layers:
        return np.empty(s_full.shape[:-1] + (0,), dtype=np.float64)
    return np.concatenate([layer_affine(p, s_full, ux, i) for i in layers], axis=-1)


def eo_step_ham(s_even, s_odd, eo: EvenOddOperator, x) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous HAM update expressed over the partition:

        s_even' = W_P^T rho(s_odd) + b_even
        s_odd'  = W_P  rho(s_even) + b_odd + U_odd rho(x)
    """
    s_even, s_odd = _check_halves(eo, s_even, s_odd)
    ux = input_drive(eo.params, x)
    s = eo.assemble(s_even, s_odd)
    return half_affine(eo, s, ux, "even"), half_affine(eo, s, ux, "odd")


def eo_step_chn(s_even, s_odd, eo: EvenOddOperator, x) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous CHN update over the partition; the gain rho'(.) uses each
    half's own previous value and multiplies the whole affine part (bias included)."""
    s_even, s_odd = _check_halves(eo, s_even, s_odd)
    nl = eo.params.nonlin
    ux = input_drive(eo.params, x)
    s = eo.assemble(s_even, s_odd)
    new_even = nl.derivative(s_even) * half_affine(eo, s, ux, "even")
    new_odd = nl.derivative(s_odd) * half_affine(eo, s, ux, "odd")
    return new_even, new_odd


def eo_fused_step_ham(s_even, eo: EvenOddOperator, x, return_odd: bool = False):
    """Advance the even half two time steps, eliminating the odd half:

        s_even'' = W_P^T rho(W_P rho(s_even) + b_odd + U_odd rho(x)) + b_even

    The implied odd state is returned on request for diagnostics.
    """
    if eo.params.variant != HAM:
        raise ValueError("the fused even-odd step requires a HAM model")
    s_even = np.asarray(s_even, dtype=np.float64)
    if s_even.shape[-1] != eo.n_even:
        raise ValueError(f"even half has size {s_even.shape[-1]}, expected {eo.n_even}")
    ux = input_drive(eo.params, x)
    zeros_odd = np.zeros(s_even.shape[:-1] + (eo.n_odd,), dtype=np.float64)
    s_odd = half_affine(eo, eo.assemble(s_even, zeros_odd), ux, "odd")
    s_even_next = half_affine(eo, eo.assemble(s_even, s_odd), ux, "even")
    if return_odd:
        return s_even_next, s_odd
    return s_even_next


def eo_init(s_odd0, eo: EvenOddOperator) -> np.ndarray:
    """Even-half initialization that makes the first synchronous update a no-op
    on s_even (s_even^1 = s_even^0), removing the redundant second DEQ's
    transient and with it the possibility of 2-cycles.

    The input never reaches the even half directly (it couples to layer 1,
    which is odd), so no x is needed here.
    """
    if eo.params.variant != HAM:
        raise ValueError("eo_init is defined for HAM models")
    s_odd0 = np.asarray(s_odd0, dtype=np.float64)
    if s_odd0.shape[-1] != eo.n_odd:
        raise ValueError(f"odd half has size {s_odd0.shape[-1]}, expected {eo.n_odd}")
    zeros_even = np.zeros(s_odd0.shape[:-1] + (eo.n_even,), dtype=np.float64)
    return half_affine(eo, eo.assemble(zeros_even, s_odd0), None, "even")
