"""Parameter-shift gradients and neural-tangent-kernel estimation.

Every parametric generator has spectrum {-1, +1}, so f is a degree-1
trigonometric polynomial in 2*theta_i and the two-point rule

    d f / d theta_i = f(theta + (pi/4) e_i) - f(theta - (pi/4) e_i)

is exact with unit coefficients.  Locality makes it cheap: only the local
observables k in M_i depend on theta_i, so each coordinate needs two
evaluations of those f_k alone.  Second derivatives nest the same rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import CircuitSpec, ParamVector
from .lightcone import LightConeIndex
from .localsim import Simulator, local_expectation, run_pruned, _apply_1q
from .rng import as_seed, stream

__all__ = [
    "SHIFT",
    "GradientVector",
    "NTKMatrix",
    "grad_parameter_shift",
    "grad_sampled",
    "gradient_values",
    "gradient_batch",
    "second_derivative",
    "empirical_ntk",
    "analytic_ntk_mc",
    "ntk_bounds_check",
]

SHIFT = np.pi / 4


@dataclass(frozen=True)
class GradientVector:
    """df/dtheta_i for i = 1..Lm, with evaluation metadata."""

    values: np.ndarray
    exact: bool
    shots_per_point: int | None = None
    variance_bound: float | None = None


def gradient_values(sim: Simulator, theta_values: np.ndarray, x) -> np.ndarray:
    """Exact parameter-shift gradient of the model at one (theta, x); shape (P,)."""
    P = sim.spec.num_params
    grad = np.zeros(P)
    N = sim.spec.normalization
    for pruned in sim.pruned:
        cone = pruned.retained_params
        if not cone:
            continue
        rows = np.tile(theta_values, (2 * len(cone), 1))
        for j, i in enumerate(cone):
            rows[2 * j, i - 1] += SHIFT
            rows[2 * j + 1, i - 1] -= SHIFT
        vals = local_expectation(pruned, rows, x)
        for j, i in enumerate(cone):
            grad[i - 1] += (vals[2 * j] - vals[2 * j + 1]) / N
    return grad


def gradient_batch(sim: Simulator, thetas: np.ndarray, x) -> np.ndarray:
    """Exact gradients for a batch of parameter vectors; shape (B, P)."""
    thetas = np.atleast_2d(thetas)
    B, P = thetas.shape
    grad = np.zeros((B, P))
    N = sim.spec.normalization
    for pruned in sim.pruned:
        cone = pruned.retained_params
        if not cone:
            continue
        nc = len(cone)
        rows = np.repeat(thetas[:, None, :], 2 * nc, axis=1)
        for j, i in enumerate(cone):
            rows[:, 2 * j, i - 1] += SHIFT
            rows[:, 2 * j + 1, i - 1] -= SHIFT
        vals = local_expectation(pruned, rows.reshape(B * 2 * nc, P), x).reshape(B, nc, 2)
        diff = (vals[:, :, 0] - vals[:, :, 1]) / N
        for j, i in enumerate(cone):
            grad[:, i - 1] += diff[:, j]
    return grad


def gradient_naive(sim: Simulator, theta_values: np.ndarray, x) -> np.ndarray:
    """Shift rule through full model evaluations (no locality skipping)."""
    P = sim.spec.num_params
    grad = np.empty(P)
    for i in range(1, P + 1):
        tp = theta_values.copy()
        tm = theta_values.copy()
        tp[i - 1] += SHIFT
        tm[i - 1] -= SHIFT
        grad[i - 1] = sim.value(tp, x) - sim.value(tm, x)
    return grad


def second_derivative(sim: Simulator, theta_values: np.ndarray, i: int, j: int, x) -> float:
    """Nested shift rule for d^2 f / (dtheta_i dtheta_j); exact, i = j allowed."""
    rows = np.tile(theta_values, (4, 1))
    signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    for r, (si, sj) in enumerate(signs):
        rows[r, i - 1] += si * SHIFT
        rows[r, j - 1] += sj * SHIFT
    N = sim.spec.normalization
    total = 0.0
    ks = set(sim.lci.future(i)).intersection(sim.lci.future(j))
    for k in sorted(ks):
        vals = local_expectation(sim.pruned[k - 1], rows, x)
        total += (vals[0] - vals[1] - vals[2] + vals[3]) / N
    return float(total)


def grad_parameter_shift(spec: CircuitSpec, lci: LightConeIndex, theta: ParamVector, x, sim: Simulator | None = None) -> GradientVector:
    """Exact gradient via the two-point rule; re-evaluates only f_k with k in M_i."""
    sim = sim if sim is not None else Simulator(spec, lci)
    return GradientVector(values=gradient_values(sim, theta.values, x), exact=True)


def grad_sampled(
    spec: CircuitSpec,
    lci: LightConeIndex,
    theta: ParamVector,
    x,
    shots_per_point: int,
    rng,
    sim: Simulator | None = None,
) -> GradientVector:
    """Unbiased shot-based gradient: the shift rule with sampled model values.

    Each shifted point is estimated with independent measurements of every
    O_k; the recorded variance bound is A m^2 / (shots N(m)^2) with A = 2.
    """
    if shots_per_point < 1:
        raise ValueError(f"shots_per_point must be >= 1, got {shots_per_point}")
    seed = as_seed(rng)
    sim = sim if sim is not None else Simulator(spec, lci)
    m = spec.num_qubits
    N = spec.normalization
    P = spec.num_params

    # Branch probabilities of the upper eigenvalue per qubit; for qubits
    # outside M_i the shifted state equals the unshifted one, so cache it.
    eig = [np.linalg.eigh(p.obs_matrix) for p in sim.pruned]
    base_pup = np.array(
        [_branch_prob(p, theta.values, x, eig[k][1]) for k, p in enumerate(sim.pruned)]
    )

    def sampled_value(theta_vals, touched, stream_idx):
        total = 0.0
        for k, pruned in enumerate(sim.pruned, start=1):
            pu = (
                _branch_prob(pruned, theta_vals, x, eig[k - 1][1])
                if k in touched
                else base_pup[k - 1]
            )
            gen = stream(seed, "grad-shots", stream_idx, k)
            c = gen.binomial(shots_per_point, pu)
            lo, hi = eig[k - 1][0]
            total += hi * c + lo * (shots_per_point - c)
        return total / (shots_per_point * N)

    grad = np.empty(P)
    for i in range(1, P + 1):
        touched = set(lci.future(i))
        tp = theta.values.copy()
        tm = theta.values.copy()
        tp[i - 1] += SHIFT
        tm[i - 1] -= SHIFT
        grad[i - 1] = sampled_value(tp, touched, 2 * i) - sampled_value(tm, touched, 2 * i + 1)
    bound = 2.0 * m**2 / (shots_per_point * N**2)
    return GradientVector(values=grad, exact=False, shots_per_point=shots_per_point, variance_bound=bound)


def _branch_prob(pruned, theta_vals, x, vecs) -> float:
    state = run_pruned(pruned, theta_vals[None, :], x)[0]
    proj = np.outer(vecs[:, 1], vecs[:, 1].conj())
    pstate = _apply_1q(state[None, :], proj, pruned.target_pos, pruned.num_local)[0]
    return float(np.vdot(state, pstate).real.clip(0.0, 1.0))


# ---------------------------------------------------------------------------
# Neural tangent kernels


@dataclass(frozen=True)
class NTKMatrix:
    """Kernel over an ordered input list; the first train_count inputs are the
    training block used for the spectral window."""

    entries: np.ndarray
    inputs: np.ndarray
    kind: str
    n_k: float
    lambda_min: float
    lambda_max: float
    train_count: int
    standard_errors: np.ndarray | None = None
    samples: int | None = None

    @property
    def train_block(self) -> np.ndarray:
        return self.entries[: self.train_count, : self.train_count]


def _symmetrize(K: np.ndarray) -> np.ndarray:
    return (K + K.T) / 2.0


def empirical_ntk(
    spec: CircuitSpec,
    lci: LightConeIndex,
    theta: ParamVector,
    inputs,
    nk: float = 1.0,
    sim: Simulator | None = None,
    train_count: int | None = None,
) -> NTKMatrix:
    """K_hat(x, x') = (1/N_K) grad f(x) . grad f(x') from exact shift-rule gradients."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empirical_ntk needs at least one input")
    sim = sim if sim is not None else Simulator(spec, lci)
    G = np.stack([gradient_values(sim, theta.values, x) for x in X])
    K = _symmetrize(G @ G.T / nk)
    tc = train_count if train_count is not None else X.shape[0]
    evals = np.linalg.eigvalsh(K[:tc, :tc])
    return NTKMatrix(
        entries=K,
        inputs=X,
        kind="empirical",
        n_k=nk,
        lambda_min=float(evals[0]),
        lambda_max=float(evals[-1]),
        train_count=tc,
    )


def analytic_ntk_mc(
    spec: CircuitSpec,
    lci: LightConeIndex,
    inputs,
    samples: int,
    rng,
    nk: float | None = None,
    sim: Simulator | None = None,
    train_count: int | None = None,
) -> NTKMatrix:
    """Monte-Carlo mean of the empirical NTK over uniform initialization.

    The default normalization N_K is calibrated so the Monte-Carlo mean
    diagonal averages to 1 over the given inputs.
    """
    if samples < 30:
        raise ValueError("analytic_ntk_mc needs at least 30 samples")
    seed = as_seed(rng)
    sim = sim if sim is not None else Simulator(spec, lci)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    nx = X.shape[0]
    thetas = ParamVector.uniform_batch(spec, samples, stream(seed, "ntk-mc"))
    G = [gradient_batch(sim, thetas, x) for x in X]  # each (S, P)
    K = np.empty((nx, nx))
    SE = np.empty((nx, nx))
    for a in range(nx):
        for b in range(a, nx):
            prods = np.einsum("sp,sp->s", G[a], G[b])
            K[a, b] = K[b, a] = prods.mean()
            SE[a, b] = SE[b, a] = prods.std(ddof=1) / np.sqrt(samples)
    if nk is None:
        nk = float(np.trace(K) / nx)
    K = _symmetrize(K / nk)
    SE = SE / nk
    tc = train_count if train_count is not None else nx
    evals = np.linalg.eigvalsh(K[:tc, :tc])
    return NTKMatrix(
        entries=K,
        inputs=X,
        kind="analytic-mc",
        n_k=float(nk),
        lambda_min=float(evals[0]),
        lambda_max=float(evals[-1]),
        train_count=tc,
        standard_errors=SE,
        samples=samples,
    )


def ntk_bounds_check(
    spec: CircuitSpec,
    lci: LightConeIndex,
    theta0: ParamVector,
    theta1: ParamVector,
    inputs,
    nk: float = 1.0,
    max_pairs: int = 300,
) -> dict:
    """Evaluate both sides of the kernel Lipschitz bound, the gradient bound
    2|M_i|/N, and the nested-shift second-derivative bound 4|M_i ^ M_j|/N."""
    sim = Simulator(spec, lci)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    N = spec.normalization
    P = spec.num_params

    K0 = empirical_ntk(spec, lci, theta0, X, nk=nk, sim=sim).entries
    K1 = empirical_ntk(spec, lci, theta1, X, nk=nk, sim=sim).entries
    lip_lhs = float(np.max(np.abs(K0 - K1)))
    dist = float(np.max(np.abs(theta0.values - theta1.values)))
    lip_rhs = 16.0 * lci.sigma1 * lci.max_future**2 * lci.max_past / (nk * N**2) * dist

    grad_ok = True
    grad_margin = np.inf
    for theta in (theta0, theta1):
        for x in X:
            g = gradient_values(sim, theta.values, x)
            caps = np.array([2.0 * len(lci.future(i)) / N for i in range(1, P + 1)])
            grad_margin = min(grad_margin, float(np.min(caps - np.abs(g))))
            if np.any(np.abs(g) > caps + 1e-10):
                grad_ok = False

    pairs = [(i, j) for i in range(1, P + 1) for j in range(i, P + 1)]
    if len(pairs) > max_pairs:
        step = len(pairs) // max_pairs + 1
        pairs = pairs[::step]
    hess_ok = True
    hess_margin = np.inf
    x0 = X[0]
    for i, j in pairs:
        d2 = second_derivative(sim, theta0.values, i, j, x0)
        cap = 4.0 * len(set(lci.future(i)).intersection(lci.future(j))) / N
        hess_margin = min(hess_margin, cap - abs(d2))
        if abs(d2) > cap + 1e-10:
            hess_ok = False

    return {
        "lipschitz_lhs": lip_lhs,
        "lipschitz_rhs": lip_rhs,
        "lipschitz_ok": lip_lhs <= lip_rhs + 1e-10,
        "gradient_bound_ok": grad_ok,
        "gradient_margin": grad_margin,
        "second_derivative_bound_ok": hess_ok,
        "second_derivative_margin": float(hess_margin),
        "pairs_checked": len(pairs),
        "all_ok": (lip_lhs <= lip_rhs + 1e-10) and grad_ok and hess_ok,
    }
