"""Full 2^m statevector evaluation (no pruning).

This is the reference route: it walks the entire circuit on the full Hilbert
space and reads out every local observable from one output state.  The pruned
local simulator must agree with it to 1e-10; keeping the two code paths
separate is the point, so nothing here is shared with localsim.
"""

from __future__ import annotations

import numpy as np

from .circuits import CircuitSpec

__all__ = ["full_state", "full_local_values", "full_model_value"]


def _rot(theta: float, axis) -> np.ndarray:
    nx, ny, nz = axis
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[c - 1j * s * nz, -s * ny - 1j * s * nx], [s * ny - 1j * s * nx, c + 1j * s * nz]]
    )


def _apply_1q(state: np.ndarray, mat: np.ndarray, q: int, m: int) -> np.ndarray:
    s = state.reshape(1 << (q - 1), 2, -1)
    return np.einsum("ij,ajb->aib", mat, s).reshape(-1)


def _apply_2q(state: np.ndarray, mat: np.ndarray, qa: int, qb: int, m: int) -> np.ndarray:
    # qa < qb; gate index convention: row = 2*bit(qa) + bit(qb).
    a = 1 << (qa - 1)
    b = 1 << (qb - qa - 1)
    c = 1 << (m - qb)
    s = state.reshape(a, 2, b, 2, c)
    g = mat.reshape(2, 2, 2, 2)
    return np.einsum("ikjl,ajblc->aibkc", g, s).reshape(-1)


def full_state(spec: CircuitSpec, theta_values: np.ndarray, x) -> np.ndarray:
    """Output statevector U(theta, x)|0...0> on all m qubits."""
    m = spec.num_qubits
    x = np.atleast_1d(np.asarray(x, dtype=float))
    state = np.zeros(2**m, dtype=complex)
    state[0] = 1.0
    for ell, layer in enumerate(spec.layers, start=1):
        for k in range(1, m + 1):
            th = theta_values[m * (ell - 1) + k - 1]
            state = _apply_1q(state, _rot(th, layer.param_axes[k - 1]), k, m)
        for ei, e in enumerate(layer.pairing):
            for c in range(1, spec.input_dim + 1):
                for q in e:
                    axis = layer.encoding_axes.get((q, c))
                    if axis is not None:
                        state = _apply_1q(state, _rot(x[c - 1], axis), q, m)
                inter = layer.interleavers.get((ei, c))
                if inter is not None:
                    inter = np.asarray(inter, complex)
                    if len(e) == 1:
                        state = _apply_1q(state, inter, e[0], m)
                    else:
                        state = _apply_2q(state, inter, e[0], e[1], m)
            gate = layer.fixed_gates[ei] if ei < len(layer.fixed_gates) else None
            if gate is not None:
                if len(e) == 1:
                    state = _apply_1q(state, gate, e[0], m)
                else:
                    state = _apply_2q(state, gate, e[0], e[1], m)
    return state


def full_local_values(spec: CircuitSpec, theta_values: np.ndarray, x) -> np.ndarray:
    """All f_k = <psi|O_k|psi> from a single full-statevector run."""
    m = spec.num_qubits
    psi = full_state(spec, theta_values, x)
    out = np.empty(m)
    for k in range(1, m + 1):
        opsi = _apply_1q(psi, spec.observable[k - 1].matrix, k, m)
        out[k - 1] = np.vdot(psi, opsi).real
    return out


def full_model_value(spec: CircuitSpec, theta_values: np.ndarray, x) -> float:
    return float(full_local_values(spec, theta_values, x).sum() / spec.normalization)
