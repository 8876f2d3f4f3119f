"""Exact and shot-sampled evaluation of local observables on pruned circuits.

Each observable f_k is evaluated on its own pruned circuit with a dense
complex statevector over the local qubits J^1_k.  Evaluations accept a batch
axis over parameter vectors, which is what makes Monte-Carlo ensembles and
parameter-shift sweeps cheap: the per-gate work is one einsum over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import CircuitSpec, Dataset, ParamVector
from .lightcone import LightConeIndex, PrunedCircuit, build_lightcones, prune_all
from .rng import as_seed, stream

__all__ = [
    "ModelValue",
    "Simulator",
    "eval_local",
    "eval_model",
    "sample_model",
    "calibrate_normalization",
    "CalibrationResult",
]


def _rot_batch(theta: np.ndarray, gen: np.ndarray) -> np.ndarray:
    """exp(-i theta G) for G with G^2 = I: cos(theta) I - i sin(theta) G."""
    c = np.cos(theta)[..., None, None]
    s = np.sin(theta)[..., None, None]
    return c * np.eye(2) - 1j * s * gen


def _apply_1q(state: np.ndarray, mat: np.ndarray, pos: int, nq: int) -> np.ndarray:
    B = state.shape[0]
    left = 1 << pos
    right = 1 << (nq - pos - 1)
    s = state.reshape(B, left, 2, right)
    if mat.ndim == 2:
        out = np.einsum("ij,bljr->blir", mat, s)
    else:
        out = np.einsum("bij,bljr->blir", mat, s)
    return out.reshape(B, -1)


def _apply_2q(state: np.ndarray, mat: np.ndarray, pos0: int, pos1: int, nq: int) -> np.ndarray:
    B = state.shape[0]
    a = 1 << pos0
    b = 1 << (pos1 - pos0 - 1)
    c = 1 << (nq - pos1 - 1)
    s = state.reshape(B, a, 2, b, 2, c)
    g = mat.reshape(2, 2, 2, 2)
    return np.einsum("ikjl,sajblc->saibkc", g, s).reshape(B, -1)


def run_pruned(pruned: PrunedCircuit, thetas: np.ndarray, x) -> np.ndarray:
    """Output local statevectors, batched: thetas (B, P) -> states (B, local_dim)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    B = thetas.shape[0]
    nq = pruned.num_local
    state = np.zeros((B, pruned.local_dim), dtype=complex)
    state[:, 0] = 1.0
    for op in pruned.ops:
        kind = op[0]
        if kind == "param":
            _, i, pos, gen = op
            state = _apply_1q(state, _rot_batch(thetas[:, i - 1], gen), pos, nq)
        elif kind == "enc":
            _, coord0, pos, gen = op
            state = _apply_1q(state, _rot_batch(np.float64(x[coord0]), gen), pos, nq)
        else:
            _, positions, gate = op
            if len(positions) == 1:
                state = _apply_1q(state, gate, positions[0], nq)
            else:
                state = _apply_2q(state, gate, positions[0], positions[1], nq)
    return state


def local_expectation(pruned: PrunedCircuit, thetas: np.ndarray, x) -> np.ndarray:
    """f_k for a batch of parameter vectors; shape (B,)."""
    state = run_pruned(pruned, thetas, x)
    opsi = _apply_1q(state, pruned.obs_matrix, pruned.target_pos, pruned.num_local)
    return np.einsum("bi,bi->b", state.conj(), opsi).real


def eval_local(pruned: PrunedCircuit, theta: ParamVector, x) -> float:
    """Exact expectation of O_k in the pruned-circuit output state."""
    return float(local_expectation(pruned, theta.values[None, :], x)[0])


@dataclass(frozen=True)
class ModelValue:
    """Model output with its per-qubit pieces: value = sum(locals)/normalization."""

    value: float
    locals: np.ndarray
    normalization: float


class Simulator:
    """Evaluation engine: light cones and pruned circuits built once per spec."""

    def __init__(self, spec: CircuitSpec, lci: LightConeIndex | None = None):
        self.spec = spec
        self.lci = lci if lci is not None else build_lightcones(spec)
        self.pruned = prune_all(spec, self.lci)

    def local_values(self, theta_values: np.ndarray, x) -> np.ndarray:
        """All f_k at one parameter vector; shape (m,)."""
        return np.array(
            [local_expectation(p, theta_values[None, :], x)[0] for p in self.pruned]
        )

    def local_values_batch(self, thetas: np.ndarray, x) -> np.ndarray:
        """All f_k for a batch of parameter vectors; shape (B, m)."""
        return np.stack([local_expectation(p, thetas, x) for p in self.pruned], axis=1)

    def value(self, theta_values: np.ndarray, x) -> float:
        return float(self.local_values(theta_values, x).sum() / self.spec.normalization)

    def values_batch(self, thetas: np.ndarray, x) -> np.ndarray:
        return self.local_values_batch(thetas, x).sum(axis=1) / self.spec.normalization

    def values_dataset(self, theta_values: np.ndarray, X: np.ndarray) -> np.ndarray:
        """f(theta, x) for each row x of X; shape (n,)."""
        return np.array([self.value(theta_values, x) for x in np.atleast_2d(X)])

    def model_value(self, theta: ParamVector, x) -> ModelValue:
        locs = self.local_values(theta.values, x)
        return ModelValue(
            value=float(locs.sum() / self.spec.normalization),
            locals=locs,
            normalization=self.spec.normalization,
        )


def eval_model(spec: CircuitSpec, lci: LightConeIndex, theta: ParamVector, x) -> ModelValue:
    """Evaluate every f_k on its pruned circuit and return the normalized sum."""
    return Simulator(spec, lci).model_value(theta, x)


def sample_model(spec: CircuitSpec, lci: LightConeIndex, theta: ParamVector, x, shots: int, rng) -> float:
    """Unbiased shot estimate of f(theta, x).

    Every shot measures each O_k in its eigenbasis (all O_k commute, so this
    matches a joint physical measurement in distribution per qubit); the
    estimate is the shot average of (1/N(m)) sum_k (sampled eigenvalue).
    Variance is at most m^2 / (shots * N(m)^2).
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    seed = as_seed(rng)
    sim = Simulator(spec, lci)
    total = 0.0
    for k, pruned in enumerate(sim.pruned, start=1):
        state = run_pruned(pruned, theta.values[None, :], x)[0]
        evals, vecs = np.linalg.eigh(pruned.obs_matrix)
        # Probability of the upper eigenvalue branch on the target qubit.
        proj = np.outer(vecs[:, 1], vecs[:, 1].conj())
        pstate = _apply_1q(state[None, :], proj, pruned.target_pos, pruned.num_local)[0]
        p_up = float(np.vdot(state, pstate).real.clip(0.0, 1.0))
        c_up = _binomial(shots, p_up, stream(seed, "shots", k))
        total += evals[1] * c_up + evals[0] * (shots - c_up)
    return float(total / (shots * spec.normalization))


def _binomial(n: int, p: float, gen: np.random.Generator) -> float:
    # Beyond int64-range shot counts, the normal approximation is exact to
    # double precision; below it, sample the binomial directly.
    if n <= 2**62:
        return float(gen.binomial(n, p))
    mean = n * p
    sd = np.sqrt(n * p * (1.0 - p))
    return float(np.clip(np.rint(mean + sd * gen.standard_normal()), 0, n))


@dataclass(frozen=True)
class CalibrationResult:
    """Monte-Carlo initialization statistics at the current N(m)."""

    mean: np.ndarray
    covariance: np.ndarray
    mean_se: np.ndarray
    local_zscores: np.ndarray
    mean_diag_covariance: float
    rescale_factor: float
    suggested_normalization: float
    samples: int


def calibrate_normalization(spec: CircuitSpec, lci: LightConeIndex, probe_inputs, samples: int, rng) -> CalibrationResult:
    """Estimate E[f], Cov(f(x), f(x')) over uniform initialization.

    Also reports per-(input, qubit) z-scores for E[f_k] = 0 and the factor
    that would rescale N(m) so the mean diagonal covariance equals 1.
    """
    if samples < 100:
        raise ValueError("calibration needs at least 100 samples")
    seed = as_seed(rng)
    sim = Simulator(spec, lci)
    X = np.atleast_2d(np.asarray(probe_inputs, dtype=float))
    thetas = ParamVector.uniform_batch(spec, samples, stream(seed, "calibrate"))
    values = np.empty((X.shape[0], samples))
    zscores = np.empty((X.shape[0], spec.num_qubits))
    for a, x in enumerate(X):
        locs = sim.local_values_batch(thetas, x)
        values[a] = locs.sum(axis=1) / spec.normalization
        mu = locs.mean(axis=0)
        se = locs.std(axis=0, ddof=1) / np.sqrt(samples)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, mu / se, np.where(np.abs(mu) > 0, np.inf, 0.0))
        zscores[a] = z
    cov = np.atleast_2d(np.cov(values, ddof=1)) if X.shape[0] > 1 else np.array([[values[0].var(ddof=1)]])
    second_moment = (values**2).mean(axis=1)  # E[f(x)^2], the zero-mean covariance diagonal
    mean_diag = float(second_moment.mean())
    rescale = float(np.sqrt(mean_diag))
    return CalibrationResult(
        mean=values.mean(axis=1),
        covariance=cov,
        mean_se=values.std(axis=1, ddof=1) / np.sqrt(samples),
        local_zscores=zscores,
        mean_diag_covariance=mean_diag,
        rescale_factor=rescale,
        suggested_normalization=float(spec.normalization * rescale),
        samples=samples,
    )


def second_moment_table(spec: CircuitSpec, lci: LightConeIndex, probe_inputs, samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """E[f(x) f(x')] over uniform initialization, with entrywise standard errors."""
    seed = as_seed(rng)
    sim = Simulator(spec, lci)
    X = np.atleast_2d(np.asarray(probe_inputs, dtype=float))
    thetas = ParamVector.uniform_batch(spec, samples, stream(seed, "second-moment"))
    vals = np.stack([sim.values_batch(thetas, x) for x in X], axis=0)  # (nx, S)
    prod = vals[:, None, :] * vals[None, :, :]
    return prod.mean(axis=2), prod.std(axis=2, ddof=1) / np.sqrt(samples)


def loss_dataset(sim: Simulator, theta_values: np.ndarray, ds: Dataset) -> float:
    r = sim.values_dataset(theta_values, ds.inputs) - ds.labels
    return float(0.5 * np.dot(r, r) / ds.size)
