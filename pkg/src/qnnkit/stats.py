"""Initialization ensembles, cumulant estimation, and normality testing.

Cumulant estimates are k-statistics: for each integer partition of the order
we form the symmetric mean over distinct index tuples (exactly unbiased for
the matching product of raw moments) and combine them with the
moments-to-cumulants partition formula.  The result is unbiased for the true
cumulant at every sample size, for every order implemented here (1..6).
Standard errors come from a delete-1 jackknife.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats as sps

from .circuits import CircuitSpec, ParamVector
from .lightcone import LightConeIndex
from .localsim import Simulator
from .rng import as_seed, stream

__all__ = [
    "SampleEnsemble",
    "sample_init_ensemble",
    "pathological_thetas",
    "kstat",
    "cumulants",
    "DependencyGraph",
    "build_dependency_graph",
    "janson_diagnostic",
    "janson_constant",
    "lilliefors_test",
    "anderson_darling_test",
    "mardia_tests",
    "normality_tests",
    "save_ensemble_csv",
    "load_ensemble_csv",
]


# ---------------------------------------------------------------------------
# Ensembles


@dataclass(frozen=True)
class SampleEnsemble:
    """f(theta, x) over random initializations, one row per probe input."""

    values: np.ndarray
    probe_inputs: np.ndarray
    seed: int
    num_qubits: int
    num_layers: int
    normalization: float
    sampler: str = "uniform"

    @property
    def size(self) -> int:
        return self.values.shape[1]

    @property
    def raw_sums(self) -> np.ndarray:
        """Unnormalized sums sum_k f_k = N(m) * f."""
        return self.values * self.normalization


def pathological_thetas(spec: CircuitSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Two-point initialization of the counterexample family.

    All parameters sit at 0 except the phase layer (layer index m), whose
    angles are i.i.d. fair draws from {0, pi/2}, realizing phase gates
    P(alpha) with alpha in {0, pi}.
    """
    m = spec.num_qubits
    thetas = np.zeros((size, spec.num_params))
    block = slice(m * (m - 1), m * m)
    thetas[:, block] = (np.pi / 2.0) * rng.integers(0, 2, size=(size, m))
    return thetas


def sample_init_ensemble(
    spec: CircuitSpec,
    lci: LightConeIndex,
    probe_inputs_arr,
    size: int,
    rng,
    sampler: str = "uniform",
    sim: Simulator | None = None,
) -> SampleEnsemble:
    """Exact model values over `size` random initializations (deterministic under seed)."""
    if size < 1000:
        raise ValueError("ensembles need at least 1000 samples")
    seed = as_seed(rng)
    sim = sim if sim is not None else Simulator(spec, lci)
    X = np.atleast_2d(np.asarray(probe_inputs_arr, dtype=float))
    gen = stream(seed, "init-ensemble")
    if sampler == "uniform":
        thetas = ParamVector.uniform_batch(spec, size, gen)
    elif sampler == "two-point":
        thetas = pathological_thetas(spec, size, gen)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    values = np.stack([sim.values_batch(thetas, x) for x in X], axis=0)
    return SampleEnsemble(
        values=values,
        probe_inputs=X,
        seed=seed,
        num_qubits=spec.num_qubits,
        num_layers=spec.num_layers,
        normalization=spec.normalization,
        sampler=sampler,
    )


def save_ensemble_csv(ens: SampleEnsemble, path) -> None:
    with open(path, "w") as fh:
        fh.write("seed,probe_index,value\n")
        for a in range(ens.values.shape[0]):
            for s in range(ens.size):
                fh.write(f"{s},{a},{ens.values[a, s]:.17g}\n")


def load_ensemble_csv(path, normalization: float = 1.0) -> SampleEnsemble:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    idx = rows[:, 1].astype(int)
    n_probe = idx.max() + 1
    values = np.stack([rows[idx == a, 2] for a in range(n_probe)], axis=0)
    return SampleEnsemble(
        values=values,
        probe_inputs=np.zeros((n_probe, 0)),
        seed=-1,
        num_qubits=0,
        num_layers=0,
        normalization=normalization,
        sampler="loaded",
    )


# ---------------------------------------------------------------------------
# k-statistics (unbiased cumulant estimators)


@lru_cache(maxsize=None)
def _int_partitions(r: int) -> tuple:
    """Integer partitions of r as sorted descending tuples."""
    if r == 0:
        return ((),)
    out = []

    def rec(remaining, maxpart, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(remaining, maxpart), 0, -1):
            rec(remaining - part, part, prefix + [part])

    rec(r, r, [])
    return tuple(out)


def _partition_count(lam: tuple) -> int:
    """Number of set partitions of {1..r} with block sizes lam."""
    r = sum(lam)
    count = math.factorial(r)
    for part in lam:
        count //= math.factorial(part)
    mult: dict[int, int] = {}
    for part in lam:
        mult[part] = mult.get(part, 0) + 1
    for c in mult.values():
        count //= math.factorial(c)
    return count


def _distinct_sums(lam: tuple, power_sums: dict, cache: dict):
    """Sum over distinct index tuples of prod_i x_{t_i}^{lam_i}.

    Inclusion-exclusion recursion on the multiset of exponents; works
    elementwise when the power sums are arrays (used by the jackknife).
    """
    lam = tuple(sorted(lam))
    if lam in cache:
        return cache[lam]
    if len(lam) == 0:
        return 1
    if len(lam) == 1:
        return power_sums[lam[0]]
    head, tail = lam[:-1], lam[-1]
    val = _distinct_sums(head, power_sums, cache) * power_sums[tail]
    for i in range(len(head)):
        merged = head[:i] + (head[i] + tail,) + head[i + 1 :]
        val = val - _distinct_sums(merged, power_sums, cache)
    cache[lam] = val
    return val


def _falling(n, k: int):
    out = 1
    for j in range(k):
        out = out * (n - j)
    return out


def _kstat_from_power_sums(r: int, n, power_sums: dict, cache: dict):
    total = 0
    for lam in _int_partitions(r):
        k = len(lam)
        coeff = _partition_count(lam) * (-1) ** (k - 1) * math.factorial(k - 1)
        total = total + coeff * _distinct_sums(lam, power_sums, cache) / _falling(n, k)
    return total


def kstat(x, r: int):
    """Unbiased cumulant estimator of order r (exact E[kstat] = kappa_r)."""
    if r < 1:
        raise ValueError("order must be >= 1")
    xs = list(x)
    n = len(xs)
    if n < r:
        raise ValueError(f"need at least r={r} samples, got {n}")
    power_sums = {a: sum(v**a for v in xs) for a in range(1, r + 1)}
    return _kstat_from_power_sums(r, n, power_sums, {})


def cumulants(values, orders=(1, 2, 3, 4, 5, 6)) -> dict:
    """k-statistics with delete-1 jackknife standard errors.

    values may be 1d (one variable) or 2d (n_probe, S): the estimate and SE
    are computed per row.  Sample-size preconditions: S >= 1000 for orders up
    to 4 and S >= 10000 for orders 5 and 6.
    """
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    S = arr.shape[1]
    rmax = max(orders)
    if (rmax <= 4 and S < 1000) or (rmax > 4 and S < 10000):
        raise ValueError(f"too few samples ({S}) for cumulant order {rmax}")
    out = {"orders": tuple(orders), "estimate": {}, "jackknife_se": {}}
    full_ps = {a: (arr**a).sum(axis=1) for a in range(1, rmax + 1)}
    loo_ps = {a: full_ps[a][:, None] - arr**a for a in range(1, rmax + 1)}
    for r in orders:
        full_cache: dict = {}
        est = _kstat_from_power_sums(r, S, {a: full_ps[a] for a in range(1, r + 1)}, full_cache)
        loo_cache: dict = {}
        loo = _kstat_from_power_sums(r, S - 1, {a: loo_ps[a] for a in range(1, r + 1)}, loo_cache)
        mean_loo = loo.mean(axis=1, keepdims=True)
        se = np.sqrt((S - 1) / S * ((loo - mean_loo) ** 2).sum(axis=1))
        out["estimate"][r] = np.squeeze(est)
        out["jackknife_se"][r] = np.squeeze(se)
    return out


def standardized_moments(values) -> dict:
    """Skewness g1 = k3/k2^1.5 and excess kurtosis g2 = k4/k2^2 per row."""
    c = cumulants(values, orders=(2, 3, 4))
    k2, k3, k4 = c["estimate"][2], c["estimate"][3], c["estimate"][4]
    return {
        "skewness": k3 / k2**1.5,
        "excess_kurtosis": k4 / k2**2,
        "k2": k2,
        "k3_se": c["jackknife_se"][3],
        "k4_se": c["jackknife_se"][4],
    }


# ---------------------------------------------------------------------------
# Dependency graph and the cumulant-bound diagnostic


@dataclass(frozen=True)
class DependencyGraph:
    """Graph on observables; edges join statistically dependent pairs."""

    num_vertices: int
    edges: frozenset
    degrees: np.ndarray
    max_degree: int


def build_dependency_graph(lci: LightConeIndex) -> DependencyGraph:
    """Edges (k, k') with k' in P_k, k' != k; max degree is bounded by |M||N|."""
    m = len(lci.dependency_sets)
    edges = set()
    deg = np.zeros(m, dtype=int)
    for k in range(1, m + 1):
        for kp in lci.dependency_sets[k - 1]:
            if kp != k:
                edges.add((min(k, kp), max(k, kp)))
    for a, b in edges:
        deg[a - 1] += 1
        deg[b - 1] += 1
    D = int(deg.max()) if m else 0
    assert D <= lci.max_future * lci.max_past, "dependency degree exceeded |M||N|"
    return DependencyGraph(num_vertices=m, edges=frozenset(edges), degrees=deg, max_degree=D)


def janson_constant(r: int) -> float:
    """C_r = 2^(r-1) r^(r-2)."""
    return 2.0 ** (r - 1) * float(r) ** (r - 2)


def janson_diagnostic(ens: SampleEnsemble, graph: DependencyGraph, r: int, bound_scale: float = 1.0) -> dict:
    """Empirical |kappa_r| of the unnormalized sum against C_r m (D+1)^(r-1) A^r.

    A = 1 (each local observable is bounded by 1).  High-order cumulant
    estimates carry large statistical error; this is a labeled diagnostic,
    and passes when the estimate is below the bound plus 4 jackknife SEs.
    """
    raw = ens.raw_sums
    c = cumulants(raw, orders=(r,))
    est = np.atleast_1d(c["estimate"][r])
    se = np.atleast_1d(c["jackknife_se"][r])
    bound = bound_scale * janson_constant(r) * ens.num_qubits * (graph.max_degree + 1) ** (r - 1)
    passed = np.abs(est) <= bound + 4.0 * se
    return {
        "order": r,
        "estimates": est,
        "jackknife_se": se,
        "bound": bound,
        "margin": bound - np.abs(est),
        "passed": bool(np.all(passed)),
        "per_probe_passed": passed,
    }


# ---------------------------------------------------------------------------
# Normality tests


def _dallal_wilkinson(d: float, n: int) -> float:
    if n > 100:
        d = d * (n / 100.0) ** 0.49
        n = 100
    logp = (
        -7.01256 * d * d * (n + 2.78019)
        + 2.99587 * d * math.sqrt(n + 2.78019)
        - 0.122119
        + 0.974598 / math.sqrt(n)
        + 1.67997 / n
    )
    if logp < -700.0:
        return 5e-324
    return float(min(math.exp(logp), 1.0))


def lilliefors_test(x) -> tuple[float, float]:
    """Kolmogorov-Smirnov statistic against a fitted normal, with
    estimated-parameter (Lilliefors) p-values; the far tail uses the
    Dallal-Wilkinson analytic approximation instead of the clipped table."""
    from statsmodels.stats.diagnostic import lilliefors as sm_lilliefors

    arr = np.asarray(x, dtype=float)
    d, p = sm_lilliefors(arr, dist="norm", pvalmethod="table")
    if p <= 0.0011:
        p = _dallal_wilkinson(float(d), arr.size)
    return float(d), float(p)


def anderson_darling_test(x) -> tuple[float, float]:
    """A^2 against a fitted normal with the finite-sample correction and the
    usual case-3 (both parameters estimated) p-value approximation."""
    arr = np.asarray(x, dtype=float)
    n = arr.size
    a2 = float(sps.anderson(arr, dist="norm").statistic)
    a2s = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    if a2s >= 0.6:
        expo = 1.2937 - 5.709 * a2s + 0.0186 * a2s**2
        p = math.exp(expo) if expo > -700 else 5e-324
    elif a2s > 0.34:
        p = math.exp(0.9177 - 4.279 * a2s - 1.38 * a2s**2)
    elif a2s > 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a2s - 59.938 * a2s**2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a2s - 223.73 * a2s**2)
    return a2, float(min(max(p, 5e-324), 1.0))


def mardia_tests(values: np.ndarray) -> dict:
    """Mardia multivariate skewness and kurtosis statistics with asymptotic
    p-values; values has shape (S, k)."""
    X = np.asarray(values, dtype=float)
    S, k = X.shape
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / S
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, 1e-300)
    W = evecs @ np.diag(evals**-0.5) @ evecs.T
    Y = Xc @ W
    # b1 = mean over pairs of (y_i . y_j)^3, computed from third-moment tensors.
    T = np.einsum("si,sj,sk->ijk", Y, Y, Y) / S
    b1 = float((T**2).sum())
    A = S * b1 / 6.0
    df = k * (k + 1) * (k + 2) / 6.0
    p_skew = float(sps.chi2.sf(A, df))
    sq = (Y**2).sum(axis=1)
    b2 = float((sq**2).mean())
    z = (b2 - k * (k + 2)) / math.sqrt(8.0 * k * (k + 2) / S)
    p_kurt = float(2.0 * sps.norm.sf(abs(z)))
    return {
        "skewness_stat": A,
        "skewness_p": p_skew,
        "kurtosis_z": z,
        "kurtosis_p": p_kurt,
    }


def normality_tests(ens: SampleEnsemble) -> dict:
    """Per-input KS (Lilliefors) and Anderson-Darling statistics plus
    skewness/excess kurtosis, and joint Mardia statistics on probe pairs."""
    if ens.size < 1000:
        raise ValueError("normality tests need at least 1000 samples")
    per_input = []
    std = standardized_moments(ens.values)
    skew = np.atleast_1d(std["skewness"])
    kurt = np.atleast_1d(std["excess_kurtosis"])
    for a in range(ens.values.shape[0]):
        x = ens.values[a]
        d, p_ks = lilliefors_test(x)
        a2, p_ad = anderson_darling_test(x)
        per_input.append(
            {
                "probe": a,
                "ks_stat": d,
                "ks_p": p_ks,
                "ad_stat": a2,
                "ad_p": p_ad,
                "skewness": float(skew[a]),
                "excess_kurtosis": float(kurt[a]),
            }
        )
    pairs = []
    n_probe = ens.values.shape[0]
    for a in range(n_probe):
        for b in range(a + 1, n_probe):
            res = mardia_tests(ens.values[[a, b]].T)
            res["pair"] = (a, b)
            pairs.append(res)
    return {"per_input": per_input, "pairs": pairs}
