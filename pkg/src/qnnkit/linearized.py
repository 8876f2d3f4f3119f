"""Closed-form linearized dynamics and time-t Gaussian-process posteriors.

The linearized model f_lin(theta, x) = f(theta0, x) + grad f(theta0, x) .
(theta - theta0) trained on the mean squared error has exact solutions

    continuous:  f0(x) - K0(x, X) K0^{-1} (1 - exp(-eta0 K0 t)) (F0 - Y)
    discrete:    f0(x) - K0(x, X) (1 - (1 - eta0 K0)^t) K0^{-1} (F0 - Y)

computed here through the symmetric eigendecomposition of the train-block
kernel.  The same operators, applied to a kernel estimate and an
initialization covariance estimate, give the mean and covariance of the
wide-limit Gaussian process at training time t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import CircuitSpec, Dataset, ParamVector, probe_inputs
from .errors import ConditioningError
from .gradients import NTKMatrix, analytic_ntk_mc, gradient_batch, gradient_values
from .lightcone import LightConeIndex
from .localsim import Simulator, second_moment_table
from .rng import as_seed, stream

__all__ = [
    "LinearizedSolution",
    "build_linearized",
    "lin_values",
    "lin_solution_continuous",
    "lin_solution_discrete",
    "GPPosterior",
    "gp_posterior",
    "gp_empirical_check",
    "GPCheckReport",
]

COND_LIMIT = 1e12
JITTER_SCALE = 1e-10


def _eig_with_jitter(K: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Eigendecomposition of a kernel train block, with one-shot Tikhonov
    jitter when it is numerically singular.  Returns (evals, evecs, jitter, cond)."""
    n = K.shape[0]
    evals, evecs = np.linalg.eigh(K)
    cond = np.inf if evals[0] <= 0 else float(evals[-1] / evals[0])
    jitter = 0.0
    if cond > COND_LIMIT:
        jitter = JITTER_SCALE * float(np.trace(K)) / n
        evals, evecs = np.linalg.eigh(K + jitter * np.eye(n))
        cond = np.inf if evals[0] <= 0 else float(evals[-1] / evals[0])
        if cond > COND_LIMIT:
            raise ConditioningError(cond)
    return evals, evecs, jitter, cond


def _phi(evals: np.ndarray, eta0: float, t: float, kind: str) -> np.ndarray:
    if kind == "continuous":
        return 1.0 - np.exp(-eta0 * evals * t)
    if kind == "discrete":
        return 1.0 - (1.0 - eta0 * evals) ** t
    raise ValueError(f"unknown time kind {kind!r}")


@dataclass
class LinearizedSolution:
    """Frozen ingredients of the closed-form evolution around theta0.

    inputs stacks the training inputs first (train_count rows), then probes.
    """

    theta0: np.ndarray
    inputs: np.ndarray
    train_count: int
    labels: np.ndarray
    f0: np.ndarray
    grads0: np.ndarray
    kernel: np.ndarray
    eta0: float
    n_k: float
    evals: np.ndarray
    evecs: np.ndarray
    jitter: float
    cond: float
    sim: Simulator = field(repr=False, default=None)

    @property
    def lambda_min(self) -> float:
        return float(self.evals[0])

    @property
    def lambda_max(self) -> float:
        return float(self.evals[-1])


def build_linearized(
    spec: CircuitSpec,
    lci: LightConeIndex,
    theta0: ParamVector,
    dataset: Dataset,
    probes=None,
    eta0: float = 0.1,
    n_k: float = 1.0,
    sim: Simulator | None = None,
) -> LinearizedSolution:
    """Cache f(theta0, .), its gradients, and the kernel eigensystem."""
    sim = sim if sim is not None else Simulator(spec, lci)
    if probes is None:
        probes = probe_inputs(spec.input_dim) if spec.input_dim > 0 else np.zeros((0, 0))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.size == 0:
        inputs = dataset.inputs
    else:
        inputs = np.vstack([dataset.inputs, probes])
    f0 = sim.values_dataset(theta0.values, inputs)
    grads0 = np.stack([gradient_values(sim, theta0.values, x) for x in inputs])
    kernel = grads0 @ grads0.T / n_k
    kernel = (kernel + kernel.T) / 2.0
    n = dataset.size
    evals, evecs, jitter, cond = _eig_with_jitter(kernel[:n, :n])
    return LinearizedSolution(
        theta0=theta0.values.copy(),
        inputs=inputs,
        train_count=n,
        labels=dataset.labels.copy(),
        f0=f0,
        grads0=grads0,
        kernel=kernel,
        eta0=eta0,
        n_k=n_k,
        evals=evals,
        evecs=evecs,
        jitter=jitter,
        cond=cond,
        sim=sim,
    )


def lin_values(linsol: LinearizedSolution, t: float, kind: str) -> np.ndarray:
    """Linearized model at time t on every cached input; shape (n_all,)."""
    n = linsol.train_count
    r0 = linsol.f0[:n] - linsol.labels
    phi = _phi(linsol.evals, linsol.eta0, t, kind)
    coef = linsol.evecs @ ((phi / linsol.evals) * (linsol.evecs.T @ r0))
    return linsol.f0 - linsol.kernel[:, :n] @ coef


def _lin_value_at(linsol: LinearizedSolution, t: float, x, kind: str) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if linsol.inputs.shape[1] == x.size:
        hits = np.where(np.all(np.isclose(linsol.inputs, x[None, :], atol=1e-14), axis=1))[0]
        if hits.size:
            return float(lin_values(linsol, t, kind)[hits[0]])
    if linsol.sim is None:
        raise ValueError("input not cached and no simulator attached")
    n = linsol.train_count
    f0x = linsol.sim.value(linsol.theta0, x)
    gx = gradient_values(linsol.sim, linsol.theta0, x)
    kx = gx @ linsol.grads0[:n].T / linsol.n_k
    r0 = linsol.f0[:n] - linsol.labels
    phi = _phi(linsol.evals, linsol.eta0, t, kind)
    coef = linsol.evecs @ ((phi / linsol.evals) * (linsol.evecs.T @ r0))
    return float(f0x - kx @ coef)


def lin_solution_continuous(linsol: LinearizedSolution, t: float, x) -> float:
    """Closed-form gradient-flow solution of the linearized model at (t, x)."""
    return _lin_value_at(linsol, t, x, "continuous")


def lin_solution_discrete(linsol: LinearizedSolution, t: int, x) -> float:
    """Closed-form gradient-descent solution of the linearized model at integer t."""
    return _lin_value_at(linsol, int(t), x, "discrete")


# ---------------------------------------------------------------------------
# Time-t Gaussian process


@dataclass(frozen=True)
class GPPosterior:
    """Mean and covariance of the wide-limit GP at training time t."""

    mean: np.ndarray
    cov: np.ndarray
    inputs: np.ndarray
    train_count: int
    eta0: float
    t: float
    kind: str
    min_cov_eigenvalue: float
    jitter: float


def gp_posterior(kbar: NTKMatrix, cov0: np.ndarray, labels, eta0: float, t: float, kind: str = "discrete") -> GPPosterior:
    """Four-term GP mean/covariance from a kernel estimate and an
    initialization covariance estimate over the same ordered inputs."""
    K = np.asarray(kbar.entries, dtype=float)
    C0 = np.asarray(cov0, dtype=float)
    n = kbar.train_count
    Y = np.asarray(labels, dtype=float).ravel()
    if Y.size != n:
        raise ValueError(f"{n} training inputs but {Y.size} labels")
    evals, evecs, jitter, _cond = _eig_with_jitter(K[:n, :n])
    phi = _phi(evals, eta0, t, kind)
    # A[a, :] = Kbar(x_a, X) Kbar^{-1} (1 - op)
    A = K[:, :n] @ (evecs @ np.diag(phi / evals) @ evecs.T)
    mean = A @ Y
    B = A @ C0[:n, :]
    cov = C0 - B - B.T + A @ C0[:n, :n] @ A.T
    cov = (cov + cov.T) / 2.0
    min_eig = float(np.linalg.eigvalsh(cov)[0])
    return GPPosterior(
        mean=mean,
        cov=cov,
        inputs=np.asarray(kbar.inputs),
        train_count=n,
        eta0=eta0,
        t=t,
        kind=kind,
        min_cov_eigenvalue=min_eig,
        jitter=jitter,
    )


# ---------------------------------------------------------------------------
# Empirical GP check (many seeds, trained to time t)


@dataclass
class GPCheckReport:
    inputs: np.ndarray
    train_count: int
    num_seeds: int
    t: int
    mu: np.ndarray
    emp_mean: np.ndarray
    emp_se: np.ndarray
    mu_se: np.ndarray
    zscores: np.ndarray
    init_zscores: np.ndarray
    cov_model: np.ndarray
    cov_emp: np.ndarray
    max_cov_gap: float
    mardia: list
    n_k: float

    @property
    def max_abs_z_train(self) -> float:
        return float(np.max(np.abs(self.zscores[: self.train_count])))


def train_gd_batched(sim: Simulator, theta0s: np.ndarray, dataset: Dataset, eta0: float, n_k: float, steps: int) -> np.ndarray:
    """Plain GD on a batch of independently initialized parameter vectors.

    Mathematically identical to per-seed train_gd (up to summation order);
    every seed advances in lockstep so gradient evaluations batch.
    """
    thetas = np.array(theta0s, dtype=float)
    scale = eta0 / n_k
    for _ in range(steps):
        update = np.zeros_like(thetas)
        for a, x in enumerate(dataset.inputs):
            vals = sim.values_batch(thetas, x)
            G = gradient_batch(sim, thetas, x)
            update += G * (vals - dataset.labels[a])[:, None]
        thetas = thetas - scale * update
    return thetas


def gp_empirical_check(
    spec: CircuitSpec,
    lci: LightConeIndex,
    cfg,
    probe_inputs_arr,
    num_seeds: int,
    t: int,
    kernel_samples: int = 400,
    cov_samples: int = 4000,
    mu_bootstrap: int = 200,
) -> GPCheckReport:
    """Train num_seeds independently initialized circuits for t GD steps and
    compare the ensemble of f(theta_t, .) against the time-t GP built from
    Monte-Carlo kernel and covariance estimates at the same width.

    cfg supplies the dataset, eta0 and seed; the kernel normalization is
    calibrated here (MC diagonal mean 1) and used consistently for training.
    """
    if num_seeds < 100:
        raise ValueError("gp_empirical_check needs at least 100 seeds")
    seed = cfg.seed
    ds: Dataset = cfg.dataset
    n = ds.size
    probes = np.atleast_2d(np.asarray(probe_inputs_arr, dtype=float))
    inputs_all = np.vstack([ds.inputs, probes]) if probes.size else ds.inputs

    sim = Simulator(spec, lci)
    kbar = analytic_ntk_mc(
        spec, lci, inputs_all, kernel_samples, stream(seed, "gp-kernel"), sim=sim, train_count=n
    )
    cov0, _cov0_se = second_moment_table(spec, lci, inputs_all, cov_samples, stream(seed, "gp-cov"))
    post = gp_posterior(kbar, cov0, ds.labels, cfg.eta0, t, "discrete")

    theta0s = ParamVector.uniform_batch(spec, num_seeds, stream(seed, "gp-init"))
    init_vals = np.stack([sim.values_batch(theta0s, x) for x in inputs_all], axis=1)
    thetas_t = train_gd_batched(sim, theta0s, ds, cfg.eta0, kbar.n_k, t)
    vals_t = np.stack([sim.values_batch(thetas_t, x) for x in inputs_all], axis=1)  # (S, n_all)

    emp_mean = vals_t.mean(axis=0)
    emp_se = vals_t.std(axis=0, ddof=1) / np.sqrt(num_seeds)
    init_mean = init_vals.mean(axis=0)
    init_se = init_vals.std(axis=0, ddof=1) / np.sqrt(num_seeds)
    with np.errstate(invalid="ignore", divide="ignore"):
        init_z = np.where(init_se > 0, init_mean / init_se, 0.0)

    # Propagate the kernel's Monte-Carlo error into mu_t by a parametric
    # bootstrap over kernel entries.
    boot = np.zeros((mu_bootstrap, inputs_all.shape[0]))
    if kbar.standard_errors is not None and mu_bootstrap > 0:
        gen = stream(seed, "gp-mu-boot")
        for b in range(mu_bootstrap):
            noise = gen.standard_normal(kbar.entries.shape) * kbar.standard_errors
            pert = kbar.entries + (noise + noise.T) / 2.0
            pk = NTKMatrix(
                entries=pert, inputs=kbar.inputs, kind=kbar.kind, n_k=kbar.n_k,
                lambda_min=0.0, lambda_max=0.0, train_count=n,
            )
            try:
                boot[b] = gp_posterior(pk, cov0, ds.labels, cfg.eta0, t, "discrete").mean
            except ConditioningError:
                boot[b] = post.mean
    mu_se = boot.std(axis=0, ddof=1) if mu_bootstrap > 1 else np.zeros_like(post.mean)

    z = (emp_mean - post.mean) / np.sqrt(emp_se**2 + mu_se**2)
    cov_emp = np.cov(vals_t.T, ddof=1) if inputs_all.shape[0] > 1 else np.atleast_2d(np.var(vals_t, ddof=1))

    from .stats import mardia_tests

    n_probe = probes.shape[0] if probes.size else 0
    mardia = []
    if n_probe >= 2:
        probe_vals = vals_t[:, n:]
        for a in range(n_probe):
            for b in range(a + 1, min(n_probe, a + 3)):
                res = mardia_tests(probe_vals[:, [a, b]])
                res["pair"] = (a, b)
                mardia.append(res)

    return GPCheckReport(
        inputs=inputs_all,
        train_count=n,
        num_seeds=num_seeds,
        t=t,
        mu=post.mean,
        emp_mean=emp_mean,
        emp_se=emp_se,
        mu_se=mu_se,
        zscores=z,
        init_zscores=init_z,
        cov_model=post.cov,
        cov_emp=cov_emp,
        max_cov_gap=float(np.max(np.abs(cov_emp - post.cov))),
        mardia=mardia,
        n_k=kbar.n_k,
    )
