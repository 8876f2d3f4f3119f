"""Layered parametric circuit family.

A circuit on ``m`` qubits has ``L`` layers.  Each layer applies one
parameterized single-qubit rotation per qubit (generator with spectrum
{-1, +1}, stored as a Bloch axis so the spectrum holds by construction),
followed by fixed one- and two-qubit gates on a disjoint pairing of the
qubits, optionally interleaved with input-encoding rotations.  The model
output is the normalized sum of single-qubit observable expectations,
f(theta, x) = (1/N(m)) * sum_k f_k(theta, x).

Parameter indices use the layer-qubit convention i = m*(l-1) + k with
l, k, i all 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConstructionError
from .rng import stream

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "Observable",
    "LayerSpec",
    "CircuitSpec",
    "ParamVector",
    "Dataset",
    "layer_qubit_index",
    "layer_qubit_unindex",
    "validate_circuit",
    "append_mean_zero_layer",
    "builtin_family",
    "axis_matrix",
    "circuit_to_json",
    "circuit_from_json",
    "load_circuit",
    "save_circuit",
    "synthetic_dataset",
    "probe_inputs",
    "load_dataset_csv",
    "save_dataset_csv",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

UNITARITY_TOL = 1e-12


def axis_matrix(axis) -> np.ndarray:
    """Hermitian generator n . sigma for a Bloch axis n (unit vector)."""
    nx, ny, nz = axis
    return np.array([[nz, nx - 1j * ny], [nx + 1j * ny, -nz]], dtype=complex)


def layer_qubit_index(layer: int, qubit: int, m: int) -> int:
    """Flat parameter index for (layer, qubit), both 1-based: m*(layer-1) + qubit."""
    if qubit < 1 or qubit > m:
        raise IndexError(f"qubit {qubit} out of range 1..{m}")
    if layer < 1:
        raise IndexError(f"layer {layer} out of range (must be >= 1)")
    return m * (layer - 1) + qubit


def layer_qubit_unindex(i: int, m: int) -> tuple[int, int]:
    """Inverse of layer_qubit_index: flat index -> (layer, qubit)."""
    if i < 1:
        raise IndexError(f"parameter index {i} out of range (must be >= 1)")
    return (i - 1) // m + 1, (i - 1) % m + 1


@dataclass(frozen=True)
class Observable:
    """Single-qubit observable, stored as its 2x2 Hermitian matrix.

    Valid observables are traceless with spectral norm <= 1; the usual case is
    a weighted Pauli, w * (n . sigma), built with :meth:`pauli`.
    """

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex).reshape(2, 2))
        self.matrix.setflags(write=False)

    @classmethod
    def pauli(cls, axis, weight: float = 1.0) -> "Observable":
        return cls(weight * axis_matrix(axis))

    @property
    def axis_weight(self) -> tuple[np.ndarray, float]:
        """Pauli decomposition (axis, weight); only exact for traceless observables."""
        coeffs = np.array(
            [np.trace(self.matrix @ p).real / 2.0 for p in (PAULI_X, PAULI_Y, PAULI_Z)]
        )
        w = float(np.linalg.norm(coeffs))
        axis = coeffs / w if w > 0 else np.array([0.0, 0.0, 1.0])
        return axis, w

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues ascending, eigenvector columns)."""
        return np.linalg.eigh(self.matrix)


@dataclass(frozen=True)
class LayerSpec:
    """One circuit layer.

    param_axes: (m, 3) Bloch axes of the per-qubit parametric generators.
    pairing: disjoint singletons/pairs of 1-based qubit indices (the set S_l).
    fixed_gates: per-pairing-element unitary (2x2 or 4x4); None means identity.
    encoding_axes: {(qubit, coord): Bloch axis} for input-encoding rotations
        exp(-i * x_coord * (n . sigma)) on qubits that belong to a pairing
        element; coord is 1-based.
    interleavers: {(element_index, coord): unitary} applied after the encoding
        rotations of that coordinate on that element.
    """

    param_axes: np.ndarray
    pairing: tuple[tuple[int, ...], ...]
    fixed_gates: tuple = ()
    encoding_axes: dict = field(default_factory=dict)
    interleavers: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "param_axes", np.asarray(self.param_axes, dtype=float))
        self.param_axes.setflags(write=False)
        object.__setattr__(self, "pairing", tuple(tuple(sorted(e)) for e in self.pairing))
        gates = []
        for g in self.fixed_gates:
            if g is None:
                gates.append(None)
            else:
                g = np.asarray(g, dtype=complex)
                g.setflags(write=False)
                gates.append(g)
        object.__setattr__(self, "fixed_gates", tuple(gates))

    def element_of(self, qubit: int):
        for e in self.pairing:
            if qubit in e:
                return e
        return None


@dataclass(frozen=True)
class CircuitSpec:
    """Full layered circuit: parametric structure, observables, normalization.

    param_periods holds the per-parameter sampling period (pi everywhere,
    except 2*pi for a mean-zero final layer); ParamVector copies these tags.
    """

    num_qubits: int
    num_layers: int
    layers: tuple[LayerSpec, ...]
    observable: tuple[Observable, ...]
    normalization: float
    input_dim: int = 0
    param_periods: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "observable", tuple(self.observable))
        if self.param_periods is None:
            periods = np.full(self.num_layers * self.num_qubits, np.pi)
        else:
            periods = np.asarray(self.param_periods, dtype=float)
        periods.setflags(write=False)
        object.__setattr__(self, "param_periods", periods)

    @property
    def num_params(self) -> int:
        return self.num_layers * self.num_qubits


@dataclass(frozen=True)
class ParamVector:
    """Theta in prod_i [0, period_i), layer-qubit indexed (flat, 1-based access)."""

    values: np.ndarray
    periods: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "periods", np.asarray(self.periods, dtype=float))
        if self.values.shape != self.periods.shape:
            raise ValueError("values and periods must have equal length")
        self.values.setflags(write=False)
        self.periods.setflags(write=False)

    def __len__(self) -> int:
        return self.values.size

    def get(self, i: int) -> float:
        """Value of theta_i, i 1-based."""
        return float(self.values[i - 1])

    def shifted(self, i: int, delta: float) -> "ParamVector":
        v = self.values.copy()
        v[i - 1] += delta
        return ParamVector(v, self.periods)

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values, self.periods)

    @classmethod
    def zeros(cls, spec: CircuitSpec) -> "ParamVector":
        return cls(np.zeros(spec.num_params), spec.param_periods)

    @classmethod
    def uniform(cls, spec: CircuitSpec, rng: np.random.Generator) -> "ParamVector":
        """Uniform draw respecting each index's period."""
        u = rng.random(spec.num_params)
        return cls(u * spec.param_periods, spec.param_periods)

    @classmethod
    def uniform_batch(cls, spec: CircuitSpec, size: int, rng: np.random.Generator) -> np.ndarray:
        """(size, Lm) matrix of uniform draws respecting per-index periods."""
        return rng.random((size, spec.num_params)) * spec.param_periods[None, :]


@dataclass(frozen=True)
class Dataset:
    """Training set: inputs X in [0, pi]^d (rows), real labels Y."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        Y = np.asarray(self.labels, dtype=float).ravel()
        if X.shape[0] != Y.shape[0] or Y.shape[0] < 1:
            raise ValueError("need equally many inputs and labels, at least one")
        if len({tuple(row) for row in X}) != X.shape[0]:
            raise ValueError("inputs must be pairwise distinct")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", Y)

    @property
    def size(self) -> int:
        return self.labels.size


# ---------------------------------------------------------------------------
# Validation


def _unitarity_defect(g: np.ndarray) -> float:
    return float(np.max(np.abs(g.conj().T @ g - np.eye(g.shape[0]))))


def validate_circuit(spec: CircuitSpec) -> list[str]:
    """Check every structural invariant; returns a list of violations (empty iff valid)."""
    out = []
    m = spec.num_qubits
    if len(spec.layers) != spec.num_layers:
        out.append(f"expected {spec.num_layers} layers, found {len(spec.layers)}")
    if len(spec.observable) != m:
        out.append(f"expected {m} observables, found {len(spec.observable)}")
    if spec.normalization <= 0:
        out.append(f"normalization N(m) = {spec.normalization} is not positive")
    if spec.param_periods.size != spec.num_params:
        out.append("param_periods length does not match L*m")

    for k, obs in enumerate(spec.observable, start=1):
        M = obs.matrix
        if np.max(np.abs(M - M.conj().T)) > UNITARITY_TOL:
            out.append(f"observable on qubit {k} not Hermitian")
        if abs(np.trace(M)) > UNITARITY_TOL:
            out.append(f"observable on qubit {k} not traceless")
        if np.linalg.norm(M, 2) > 1 + UNITARITY_TOL:
            out.append(f"observable on qubit {k} has spectral norm > 1")

    for ell, layer in enumerate(spec.layers, start=1):
        if layer.param_axes.shape != (m, 3):
            out.append(f"layer {ell}: param_axes shape {layer.param_axes.shape} != ({m}, 3)")
        else:
            bad = np.abs(np.linalg.norm(layer.param_axes, axis=1) - 1.0) > UNITARITY_TOL
            for k in np.nonzero(bad)[0]:
                out.append(f"layer {ell}: generator axis on qubit {k + 1} is not a unit vector")
        seen: dict[int, int] = {}
        for e in layer.pairing:
            if not 1 <= len(e) <= 2:
                out.append(f"layer {ell}: pairing element {e} is neither singleton nor pair")
            for q in e:
                if not 1 <= q <= m:
                    out.append(f"layer {ell}: qubit {q} out of range in pairing")
                elif q in seen:
                    out.append(f"qubit {q} acted on twice in layer {ell}")
                seen[q] = 1
        if len(layer.fixed_gates) != len(layer.pairing):
            out.append(f"layer {ell}: {len(layer.fixed_gates)} fixed gates for {len(layer.pairing)} pairing elements")
        for e, g in zip(layer.pairing, layer.fixed_gates):
            if g is None:
                continue
            want = 2 ** len(e)
            if g.shape != (want, want):
                out.append(f"layer {ell}: fixed gate on {e} has shape {g.shape}, expected {want}x{want}")
            elif _unitarity_defect(g) > UNITARITY_TOL:
                out.append(f"layer {ell}: fixed gate on {e} is not unitary")
        for (q, c), axis in layer.encoding_axes.items():
            if not 1 <= c <= max(spec.input_dim, 0):
                out.append(f"layer {ell}: encoding coordinate {c} exceeds input dim {spec.input_dim}")
            if layer.element_of(q) is None:
                out.append(f"layer {ell}: encoding on qubit {q} which is in no pairing element")
            if abs(np.linalg.norm(np.asarray(axis, dtype=float)) - 1.0) > UNITARITY_TOL:
                out.append(f"layer {ell}: encoding generator on qubit {q} lacks +-1 spectrum")
        for (ei, c), g in layer.interleavers.items():
            if not 0 <= ei < len(layer.pairing):
                out.append(f"layer {ell}: interleaver references element index {ei}")
                continue
            want = 2 ** len(layer.pairing[ei])
            g = np.asarray(g, dtype=complex)
            if g.shape != (want, want) or _unitarity_defect(g) > UNITARITY_TOL:
                out.append(f"layer {ell}: interleaver on element {ei} coord {c} is not unitary")
    return out


# ---------------------------------------------------------------------------
# Mean-zero final layer


def append_mean_zero_layer(spec: CircuitSpec) -> CircuitSpec:
    """Add a final layer of X-axis rotations with sampling period 2*pi.

    With the appended angles uniform in [0, 2pi) each local observable picks
    up an independent cos(2 theta) factor, so E[f_k] = 0 at initialization.
    """
    m = spec.num_qubits
    layer = LayerSpec(
        param_axes=np.tile([1.0, 0.0, 0.0], (m, 1)),
        pairing=tuple((k,) for k in range(1, m + 1)),
        fixed_gates=tuple(None for _ in range(m)),
    )
    periods = np.concatenate([spec.param_periods, np.full(m, 2 * np.pi)])
    return replace(
        spec,
        num_layers=spec.num_layers + 1,
        layers=spec.layers + (layer,),
        param_periods=periods,
    )


# ---------------------------------------------------------------------------
# Built-in families


def _random_axes(m: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(m, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _brick_pairing(m: int, ell: int) -> tuple[tuple[int, ...], ...]:
    start = 1 if ell % 2 == 1 else 2
    elements = []
    covered = set()
    q = start
    while q + 1 <= m:
        elements.append((q, q + 1))
        covered.update((q, q + 1))
        q += 2
    for q in range(1, m + 1):
        if q not in covered:
            elements.append((q,))
    return tuple(elements)


def _default_encoding(m: int, input_dim: int) -> dict:
    # One Y-axis encoding generator per input coordinate on the first
    # min(input_dim, m) qubits of layer 1.
    return {(c, c): (0.0, 1.0, 0.0) for c in range(1, min(input_dim, m) + 1)}


def _brick1d(m: int, L: int, seed: int, input_dim: int) -> CircuitSpec:
    rng = stream(seed, "family-brick1d")
    layers = []
    for ell in range(1, L + 1):
        pairing = _brick_pairing(m, ell)
        gates = tuple(CNOT if len(e) == 2 else None for e in pairing)
        layers.append(
            LayerSpec(
                param_axes=_random_axes(m, rng),
                pairing=pairing,
                fixed_gates=gates,
                encoding_axes=_default_encoding(m, input_dim) if ell == 1 else {},
            )
        )
    obs = tuple(Observable.pauli((0, 0, 1)) for _ in range(m))
    return CircuitSpec(m, L, tuple(layers), obs, normalization=float(np.sqrt(m)), input_dim=input_dim)


def _grid_shape(m: int) -> tuple[int, int]:
    r = int(np.sqrt(m))
    while r > 1 and m % r != 0:
        r -= 1
    return r, m // r


def _lattice2d(m: int, L: int, seed: int, input_dim: int) -> CircuitSpec:
    rows, cols = _grid_shape(m)
    if rows < 2 or cols < 2:
        raise ConstructionError(f"lattice2d needs m expressible as r*c with r,c >= 2; got m={m}")
    rng = stream(seed, "family-lattice2d")

    def qubit(r, c):
        return r * cols + c + 1

    # Four alternating matchings of the grid: horizontal even/odd, vertical even/odd.
    patterns = []
    for parity in (0, 1):
        pat = [
            (qubit(r, c), qubit(r, c + 1))
            for r in range(rows)
            for c in range(parity, cols - 1, 2)
        ]
        patterns.append(pat)
    for parity in (0, 1):
        pat = [
            (qubit(r, c), qubit(r + 1, c))
            for r in range(parity, rows - 1, 2)
            for c in range(cols)
        ]
        patterns.append(pat)

    layers = []
    for ell in range(1, L + 1):
        pairs = patterns[(ell - 1) % 4]
        covered = {q for e in pairs for q in e}
        pairing = tuple(pairs) + tuple((q,) for q in range(1, m + 1) if q not in covered)
        gates = tuple(CZ if len(e) == 2 else None for e in pairing)
        layers.append(
            LayerSpec(
                param_axes=_random_axes(m, rng),
                pairing=pairing,
                fixed_gates=gates,
                encoding_axes=_default_encoding(m, input_dim) if ell == 1 else {},
            )
        )
    obs = tuple(Observable.pauli((0, 0, 1)) for _ in range(m))
    return CircuitSpec(m, L, tuple(layers), obs, normalization=float(np.sqrt(m)), input_dim=input_dim)


def _random_pairing(m: int, L: int, seed: int, input_dim: int) -> CircuitSpec:
    rng = stream(seed, "family-random-pairing")
    layers = []
    for ell in range(1, L + 1):
        order = rng.permutation(m) + 1
        elements = []
        i = 0
        while i < m:
            if i + 1 < m and rng.random() < 0.7:
                elements.append((int(order[i]), int(order[i + 1])))
                i += 2
            else:
                elements.append((int(order[i]),))
                i += 1
        pairing = tuple(tuple(sorted(e)) for e in elements)
        gates = tuple(
            (CNOT if rng.random() < 0.5 else CZ) if len(e) == 2 else None for e in pairing
        )
        layers.append(
            LayerSpec(
                param_axes=_random_axes(m, rng),
                pairing=pairing,
                fixed_gates=gates,
                encoding_axes=_default_encoding(m, input_dim) if ell == 1 else {},
            )
        )
    obs = tuple(Observable.pauli((0, 0, 1)) for _ in range(m))
    return CircuitSpec(m, L, tuple(layers), obs, normalization=float(np.sqrt(m)), input_dim=input_dim)


def _pathological(m: int, L: int) -> CircuitSpec:
    """GHZ-phase-unwind counterexample circuit: output is exactly +-1.

    Layer plan (every layer carries exactly one CNOT):
      layers 1..m-1:        forward cascade CNOT(l, l+1); layer 1 folds a
                            Hadamard on qubit 1 into its two-qubit gate;
      layers m..2m-2:       reverse cascade CNOT(m-1, m) .. CNOT(1, 2); the
                            parametric gates of layer m are the phase angles;
      layers 2m-1..3m-3:    forward cascade again, with the second Hadamard
                            folded into the layer-(2m-1) gate on (1, 2).

    All parametric generators are Z-axis, so a phase gate P(alpha) is the
    layer-m rotation at theta = alpha/2 (up to global phase); every other
    parameter is meant to sit at 0.
    """
    if m < 2 or L != 3 * m - 3:
        raise ConstructionError(f"pathological family requires m >= 2 and L = 3m-3; got m={m}, L={L}")
    z_axes = np.tile([0.0, 0.0, 1.0], (m, 1))
    h_cnot = CNOT @ np.kron(HADAMARD, _ID2)

    def cascade_layer(a: int, gate: np.ndarray) -> LayerSpec:
        pairing = ((a, a + 1),) + tuple((q,) for q in range(1, m + 1) if q not in (a, a + 1))
        gates = (gate,) + tuple(None for _ in range(m - 2))
        return LayerSpec(param_axes=z_axes, pairing=pairing, fixed_gates=gates)

    layers = []
    for ell in range(1, m):  # forward
        layers.append(cascade_layer(ell, h_cnot if ell == 1 else CNOT))
    for j in range(m - 1):  # reverse, phases ride on layer m's parametric gates
        layers.append(cascade_layer(m - 1 - j, CNOT))
    for ell in range(1, m):  # forward again
        layers.append(cascade_layer(ell, h_cnot if ell == 1 else CNOT))

    beta = [np.sqrt(k) - np.sqrt(k - 1) for k in range(1, m + 1)]
    obs = tuple(Observable.pauli((0, 0, 1), weight=b) for b in beta)
    return CircuitSpec(m, L, tuple(layers), obs, normalization=float(np.sqrt(m)), input_dim=0)


FAMILIES = ("brick1d", "lattice2d", "random-pairing", "pathological")


def builtin_family(name: str, m: int, L: int, seed: int = 0, input_dim: int = 1) -> CircuitSpec:
    """Construct a built-in circuit family member.

    brick1d / lattice2d / random-pairing take any m >= 1 (lattice2d needs a
    2d grid), L >= 1; pathological requires L = 3m-3 and ignores input_dim.
    """
    if m < 1 or L < 1:
        raise ConstructionError(f"need m >= 1 and L >= 1, got m={m}, L={L}")
    if name == "brick1d":
        return _brick1d(m, L, seed, input_dim)
    if name == "lattice2d":
        return _lattice2d(m, L, seed, input_dim)
    if name == "random-pairing":
        return _random_pairing(m, L, seed, input_dim)
    if name == "pathological":
        return _pathological(m, L)
    raise ConstructionError(f"unknown family {name!r}; choose from {FAMILIES}")


# ---------------------------------------------------------------------------
# Serialization (JSON-compatible circuit file format)


def _complex_mat_to_json(g: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(g, dtype=complex)]


def _complex_mat_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def circuit_to_json(spec: CircuitSpec) -> dict:
    layers = []
    for layer in spec.layers:
        enc = {
            "generators": [
                {"qubit": q, "coord": c, "axis": [float(a) for a in axis]}
                for (q, c), axis in sorted(layer.encoding_axes.items())
            ],
            "interleavers": [
                {"element": ei, "coord": c, "matrix": _complex_mat_to_json(g)}
                for (ei, c), g in sorted(layer.interleavers.items())
            ],
        }
        layers.append(
            {
                "param_axes": [[float(a) for a in row] for row in layer.param_axes],
                "pairing": [list(e) for e in layer.pairing],
                "fixed_gates": [
                    None if g is None else _complex_mat_to_json(g) for g in layer.fixed_gates
                ],
                "encoding": enc,
            }
        )
    observable = []
    for obs in spec.observable:
        axis, w = obs.axis_weight
        observable.append({"axis": [float(a) for a in axis], "weight": w})
    return {
        "num_qubits": spec.num_qubits,
        "num_layers": spec.num_layers,
        "normalization": spec.normalization,
        "input_dim": spec.input_dim,
        "observable": observable,
        "layers": layers,
        "param_periods": [float(p) for p in spec.param_periods],
    }


def circuit_from_json(doc: dict) -> CircuitSpec:
    layers = []
    for lj in doc["layers"]:
        enc = lj.get("encoding", {}) or {}
        encoding_axes = {
            (g["qubit"], g["coord"]): tuple(g["axis"]) for g in enc.get("generators", [])
        }
        interleavers = {
            (u["element"], u["coord"]): _complex_mat_from_json(u["matrix"])
            for u in enc.get("interleavers", [])
        }
        layers.append(
            LayerSpec(
                param_axes=np.array(lj["param_axes"], dtype=float),
                pairing=tuple(tuple(e) for e in lj["pairing"]),
                fixed_gates=tuple(
                    None if g is None else _complex_mat_from_json(g) for g in lj["fixed_gates"]
                ),
                encoding_axes=encoding_axes,
                interleavers=interleavers,
            )
        )
    obs = tuple(Observable.pauli(o["axis"], o["weight"]) for o in doc["observable"])
    periods = doc.get("param_periods")
    return CircuitSpec(
        num_qubits=doc["num_qubits"],
        num_layers=doc["num_layers"],
        layers=tuple(layers),
        observable=obs,
        normalization=doc["normalization"],
        input_dim=doc.get("input_dim", 0),
        param_periods=None if periods is None else np.array(periods, dtype=float),
    )


def save_circuit(spec: CircuitSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(circuit_to_json(spec), fh, indent=1)


def load_circuit(path) -> CircuitSpec:
    with open(path) as fh:
        return circuit_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Datasets and probe inputs

_GOLDEN = 0.6180339887498949


def synthetic_dataset(kind: str, n: int, input_dim: int, seed: int = 0, label_scale: float = 0.2) -> Dataset:
    """Small regression sets with labels well inside the model's range."""
    rng = stream(seed, "dataset", n, input_dim)
    if kind == "sine":
        base = (0.25 + 0.5 * np.arange(n) / max(n - 1, 1)) * np.pi
        X = np.stack([base * (1.0 + 0.1 * d) % np.pi for d in range(input_dim)], axis=1)
        Y = label_scale * np.sin(2.0 * X.sum(axis=1))
    elif kind == "random":
        X = rng.random((n, input_dim)) * np.pi
        Y = label_scale * (2 * rng.random(n) - 1)
    else:
        raise ValueError(f"unknown synthetic dataset kind {kind!r}")
    return Dataset(X, Y)


def probe_inputs(input_dim: int, count: int = 8) -> np.ndarray:
    """Fixed quasi-random probe inputs in [0, pi]^d (deterministic across runs)."""
    j = np.arange(1, count + 1)[:, None]
    d = np.arange(1, max(input_dim, 1) + 1)[None, :]
    pts = np.pi * ((j * (_GOLDEN ** d)) % 1.0)
    return pts[:, :input_dim]


def save_dataset_csv(ds: Dataset, path) -> None:
    d = ds.inputs.shape[1]
    header = ",".join([f"x{j + 1}" for j in range(d)] + ["y"])
    rows = [
        ",".join(f"{v:.17g}" for v in list(x) + [y]) for x, y in zip(ds.inputs, ds.labels)
    ]
    with open(path, "w") as fh:
        fh.write(header + "\n" + "\n".join(rows) + "\n")


def load_dataset_csv(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        d = sum(1 for c in header if c.startswith("x"))
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    arr = np.array(rows)
    return Dataset(arr[:, :d], arr[:, d])
