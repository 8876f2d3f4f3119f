"""Interaction families, extended light cones, pruning, and cardinalities.

The extended past light cone N_k of qubit k collects all parameter indices
that can influence the local observable f_k; the extended future light cone
M_i of parameter i collects all observables it can reach.  Both follow from
the per-layer interaction sets I_{l,k} by a backward and a forward recursion:

    J^L_k = I_{L,k};      J^l_k = union of I_{l,k'} over k' in J^{l+1}_k
    M_[Lk] = I_{L,k};     M_[lk] = union of M_[(l+1)k'] over k' in I_{l,k}

Pruning a circuit to qubit k drops every parametric gate outside N_k and
every fixed/encoding element disjoint from J^l_k at its layer, leaving an
equivalent circuit on the local qubits J^1_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import CircuitSpec, axis_matrix, layer_qubit_index
from .errors import CapacityError

__all__ = [
    "LightConeIndex",
    "PrunedCircuit",
    "build_lightcones",
    "prune",
    "prune_all",
    "cardinality_report",
    "LOCAL_DIM_CAP",
]

LOCAL_DIM_CAP = 2**24


@dataclass(frozen=True)
class LightConeIndex:
    """Precomputed cone structure of one circuit (all indices 1-based).

    interactions[l-1][k-1] is the sorted tuple I_{l,k} (includes k itself);
    per_layer_past[l-1][k-1] is J^l_k; past_cones[k-1] is N_k as parameter
    indices; future_cones[i-1] is M_i as qubit indices; dependency_sets[k-1]
    is P_k = union of M_i over i in N_k.
    """

    interactions: tuple
    per_layer_past: tuple
    past_cones: tuple
    future_cones: tuple
    dependency_sets: tuple
    max_future: int
    max_past: int
    sigma1: int
    sigma2: int

    def past(self, k: int) -> tuple:
        return self.past_cones[k - 1]

    def future(self, i: int) -> tuple:
        return self.future_cones[i - 1]

    def local_qubits(self, k: int) -> tuple:
        return self.per_layer_past[0][k - 1] if self.per_layer_past else (k,)


def _interaction_sets(spec: CircuitSpec) -> list:
    m = spec.num_qubits
    layers = []
    for layer in spec.layers:
        I = [{k} for k in range(1, m + 1)]
        for e in layer.pairing:
            if len(e) == 2:
                a, b = e
                I[a - 1].update(e)
                I[b - 1].update(e)
        layers.append([tuple(sorted(s)) for s in I])
    return layers


def build_lightcones(spec: CircuitSpec) -> LightConeIndex:
    """Run both cone recursions and collect cardinality statistics."""
    m, L = spec.num_qubits, spec.num_layers
    inter = _interaction_sets(spec)

    # Backward recursion for J^l_k, l = L..1.
    per_layer = [None] * L
    if L > 0:
        per_layer[L - 1] = [set(inter[L - 1][k]) for k in range(m)]
        for ell in range(L - 1, 0, -1):
            cur = []
            for k in range(m):
                s = set()
                for kp in per_layer[ell][k]:
                    s.update(inter[ell - 1][kp - 1])
                cur.append(s)
            per_layer[ell - 1] = cur

    past = []
    for k in range(m):
        nk = []
        for ell in range(1, L + 1):
            nk.extend(m * (ell - 1) + kp for kp in sorted(per_layer[ell - 1][k]))
        past.append(tuple(sorted(nk)))

    # Forward recursion for M_[lk], l = L..1.
    future = [None] * (L * m)
    if L > 0:
        for k in range(1, m + 1):
            future[layer_qubit_index(L, k, m) - 1] = set(inter[L - 1][k - 1])
        for ell in range(L - 1, 0, -1):
            for k in range(1, m + 1):
                s = set()
                for kp in inter[ell - 1][k - 1]:
                    s.update(future[layer_qubit_index(ell + 1, kp, m) - 1])
                future[layer_qubit_index(ell, k, m) - 1] = s
    future = [tuple(sorted(s)) for s in future] if L > 0 else []

    deps = []
    for k in range(m):
        p = set()
        for i in past[k]:
            p.update(future[i - 1])
        deps.append(tuple(sorted(p)))

    sizes = np.array([len(s) for s in future], dtype=np.int64) if future else np.zeros(0, np.int64)
    return LightConeIndex(
        interactions=tuple(tuple(row) for row in inter),
        per_layer_past=tuple(
            tuple(tuple(sorted(per_layer[ell][k])) for k in range(m)) for ell in range(L)
        ),
        past_cones=tuple(past),
        future_cones=tuple(future),
        dependency_sets=tuple(deps),
        max_future=int(sizes.max()) if sizes.size else 0,
        max_past=max((len(p) for p in past), default=0),
        sigma1=int(sizes.sum()),
        sigma2=int((sizes**2).sum()),
    )


@dataclass(frozen=True)
class PrunedCircuit:
    """Circuit restricted to the light cone of one observable.

    ops is the compiled gate program on the local qubit set, in application
    order.  Entries are ("param", flat_index, local_pos, generator_matrix),
    ("enc", coord0, local_pos, generator_matrix) with coord0 0-based, or
    ("fixed", local_positions, unitary).
    """

    target_qubit: int
    local_qubits: tuple
    retained_params: tuple
    local_dim: int
    ops: tuple
    obs_matrix: np.ndarray
    target_pos: int
    normalization: float
    num_qubits: int

    @property
    def num_local(self) -> int:
        return len(self.local_qubits)


def prune(spec: CircuitSpec, k: int, lci: LightConeIndex) -> PrunedCircuit:
    """Pruned circuit for observable k per the light-cone replacement rules."""
    if not 1 <= k <= spec.num_qubits:
        raise IndexError(f"qubit {k} out of range 1..{spec.num_qubits}")
    m, L = spec.num_qubits, spec.num_layers
    local = lci.local_qubits(k) if L > 0 else (k,)
    dim = 2 ** len(local)
    if dim > LOCAL_DIM_CAP:
        raise CapacityError(
            f"local Hilbert space of qubit {k} has dimension 2^{len(local)} > cap {LOCAL_DIM_CAP}"
        )
    pos = {q: j for j, q in enumerate(local)}

    ops = []
    for ell in range(1, L + 1):
        layer = spec.layers[ell - 1]
        j_here = set(lci.per_layer_past[ell - 1][k - 1])
        for kp in sorted(j_here):
            i = layer_qubit_index(ell, kp, m)
            ops.append(("param", i, pos[kp], axis_matrix(layer.param_axes[kp - 1])))
        for ei, e in enumerate(layer.pairing):
            if not j_here.intersection(e):
                continue
            for c in range(1, spec.input_dim + 1):
                for q in e:
                    axis = layer.encoding_axes.get((q, c))
                    if axis is not None:
                        ops.append(("enc", c - 1, pos[q], axis_matrix(axis)))
                inter = layer.interleavers.get((ei, c))
                if inter is not None:
                    ops.append(("fixed", tuple(pos[q] for q in e), np.asarray(inter, complex)))
            gate = layer.fixed_gates[ei] if ei < len(layer.fixed_gates) else None
            if gate is not None:
                ops.append(("fixed", tuple(pos[q] for q in e), gate))

    return PrunedCircuit(
        target_qubit=k,
        local_qubits=local,
        retained_params=lci.past(k) if L > 0 else (),
        local_dim=dim,
        ops=tuple(ops),
        obs_matrix=spec.observable[k - 1].matrix,
        target_pos=pos[k],
        normalization=spec.normalization,
        num_qubits=m,
    )


def prune_all(spec: CircuitSpec, lci: LightConeIndex) -> list:
    return [prune(spec, k, lci) for k in range(1, spec.num_qubits + 1)]


def cardinality_report(lci: LightConeIndex, num_layers: int | None = None) -> dict:
    """Cardinalities plus the architecture-independent bound checks."""
    L = num_layers if num_layers is not None else len(lci.per_layer_past)
    m = len(lci.past_cones)
    max_local = max((len(lci.local_qubits(k)) for k in range(1, m + 1)), default=0)
    max_dim = 2**max_local
    report = {
        "max_future": lci.max_future,
        "max_past": lci.max_past,
        "sigma1": lci.sigma1,
        "sigma2": lci.sigma2,
        "max_local_dim": max_dim,
        "num_layers": L,
        "num_qubits": m,
    }
    if L > 0:
        report["bounds"] = {
            "future_le_2^L": lci.max_future <= 2**L,
            "past_le_2^(L+1)": lci.max_past <= 2 ** (L + 1),
            "sigma1_le_2m2^L": lci.sigma1 <= 2 * m * 2**L,
            "sigma2_le_2m2^2L": lci.sigma2 <= 2 * m * 2 ** (2 * L),
            "localdim_ge_2^(past/L)": max_dim >= 2 ** (lci.max_past / L),
            "localdim_le_2^past": max_dim <= 2**lci.max_past,
            "dependency_le_MN": all(
                len(p) <= lci.max_future * lci.max_past for p in lci.dependency_sets
            ),
        }
        report["all_bounds_hold"] = all(report["bounds"].values())
    return report
