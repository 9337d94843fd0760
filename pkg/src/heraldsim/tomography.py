"""Two-qubit tomography: measurement simulation, MLE reconstruction, errors.

Nine Pauli settings (sigma_i on arm 1, sigma_j on arm 2) are measured in
the coincidence basis.  Reconstruction maximizes the Poissonian likelihood
of the observed coincidence counts over the Cholesky-style parameterization
rho = T†T / tr(T†T), with the per-setting intensity profiled out (the
likelihood reduces to the multinomial form).  Uncertainties come from a
Monte Carlo over Poisson-resampled count tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .detection import COINCIDENCE_PATTERNS
from .metrics import PAULIS, PHI_PLUS, check_density_matrix

AXES = ("x", "y", "z")
SETTINGS: tuple[tuple[str, str], ...] = tuple((a, b) for a in AXES for b in AXES)

# Per axis: the eigenvector detected at the H-side and the V-side port of
# the analysis PBS (matching the circuit's analysis wave plates).
_BASIS_VECTORS = {
    "z": (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)),
    "x": (
        np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
        np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0),
    ),
    "y": (
        np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0),
        np.array([1.0, -1.0j], dtype=complex) / math.sqrt(2.0),
    ),
}

CSV_HEADER = ("ratio", "setting_1", "setting_2", "n1H", "n1V", "n2H", "n2V", "count")

LOG_LIKELIHOOD_TOL = 1e-10
MAX_ITERATIONS = 100_000


class ConvergenceError(RuntimeError):
    """Raised when the likelihood ascent fails to converge."""


def setting_projectors(setting: tuple[str, str]) -> list[np.ndarray]:
    """Four coincidence projectors of a setting, ordered as HH, HV, VH, VV ports."""
    a, b = setting
    if a not in AXES or b not in AXES:
        raise ValueError(f"unknown setting {setting}")
    vecs1 = _BASIS_VECTORS[a]
    vecs2 = _BASIS_VECTORS[b]
    projs = []
    for i in range(2):
        for j in range(2):
            v = np.kron(vecs1[i], vecs2[j])
            projs.append(np.outer(v, v.conj()))
    return projs


def expected_coincidences(rho: np.ndarray, setting: tuple[str, str]) -> np.ndarray:
    """Probabilities of the four coincidence outcomes for one setting."""
    rho = check_density_matrix(rho)
    probs = np.array(
        [float(np.real(np.trace(p @ rho))) for p in setting_projectors(setting)]
    )
    return np.clip(probs, 0.0, None)


@dataclass
class CountTable:
    """Per-setting, per-click-pattern event counts.

    Keys are ((setting_1, setting_2), (n1H, n1V, n2H, n2V)); values are
    non-negative integers.  ``ratio`` tags the splitter configuration the
    data came from.
    """

    counts: dict[tuple[tuple[str, str], tuple[int, int, int, int]], int] = field(
        default_factory=dict
    )
    ratio: str | None = None

    def add(self, setting: tuple[str, str], pattern: tuple[int, int, int, int], count: int):
        if setting not in SETTINGS:
            raise ValueError(f"unknown setting {setting}")
        if len(pattern) != 4 or any(n < 0 for n in pattern):
            raise ValueError(f"bad pattern {pattern}")
        if count < 0:
            raise ValueError(f"negative count {count}")
        key = (tuple(setting), tuple(int(n) for n in pattern))
        if key in self.counts:
            raise ValueError(f"duplicate entry for {key}")
        self.counts[key] = int(count)

    def settings_present(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted({s for s, _ in self.counts}))

    def coincidences(self, setting: tuple[str, str]) -> np.ndarray:
        """Counts of the four single-coincidence patterns for one setting."""
        return np.array(
            [self.counts.get((setting, p), 0) for p in COINCIDENCE_PATTERNS], dtype=float
        )

    def coincidence_matrix(self) -> np.ndarray:
        """(n_settings, 4) coincidence counts in canonical setting order."""
        return np.array([self.coincidences(s) for s in SETTINGS])


def simulate_counts(
    rho: np.ndarray,
    settings: Sequence[tuple[str, str]],
    events_per_setting: int,
    seed: int,
) -> CountTable:
    """Draw multinomial coincidence counts for each setting."""
    if events_per_setting < 1:
        raise ValueError("events_per_setting must be at least 1")
    rho = check_density_matrix(rho)
    table = CountTable()
    streams = np.random.SeedSequence(seed).spawn(len(settings))
    for setting, stream in zip(settings, streams):
        rng = np.random.Generator(np.random.Philox(stream))
        probs = expected_coincidences(rho, setting)
        probs = probs / probs.sum()
        draws = rng.multinomial(events_per_setting, probs)
        for pattern, n in zip(COINCIDENCE_PATTERNS, draws):
            table.add(setting, pattern, int(n))
    return table


def ingest_counts(path) -> CountTable:
    """Read a count table CSV (header ratio,setting_1,setting_2,n1H,n1V,n2H,n2V,count)."""
    table = CountTable()
    ratios = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty counts file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: bad header {header}")
        n_rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            ratio, s1, s2, *rest = [f.strip() for f in row]
            try:
                n1h, n1v, n2h, n2v, count = (int(x) for x in rest)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field") from None
            table.add((s1, s2), (n1h, n1v, n2h, n2v), count)
            ratios.add(ratio)
            n_rows += 1
        if n_rows == 0:
            raise ValueError(f"{path}: no data rows")
    if len(ratios) == 1:
        table.ratio = ratios.pop()
    return table


def write_counts(table: CountTable, path) -> None:
    """Write a count table in the ingestible CSV format (rows sorted)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for (setting, pattern), count in sorted(table.counts.items()):
            writer.writerow([table.ratio or "", *setting, *pattern, count])


def _linear_inversion(coincidences: np.ndarray) -> np.ndarray:
    """Pauli-correlation estimate of rho from per-setting frequencies."""
    freqs = np.zeros_like(coincidences)
    for i, row in enumerate(coincidences):
        total = row.sum()
        freqs[i] = row / total if total > 0 else np.full(4, 0.25)
    rho = np.eye(4, dtype=complex) / 4.0
    corr_sign = np.array([1.0, -1.0, -1.0, 1.0])
    arm1_sign = np.array([1.0, 1.0, -1.0, -1.0])
    arm2_sign = np.array([1.0, -1.0, 1.0, -1.0])
    marg1 = {a: [] for a in AXES}
    marg2 = {b: [] for b in AXES}
    for (a, b), f in zip(SETTINGS, freqs):
        corr = float(corr_sign @ f)
        rho += corr * np.kron(PAULIS[a], PAULIS[b]) / 4.0
        marg1[a].append(float(arm1_sign @ f))
        marg2[b].append(float(arm2_sign @ f))
    for a in AXES:
        rho += np.mean(marg1[a]) * np.kron(PAULIS[a], np.eye(2)) / 4.0
        rho += np.mean(marg2[a]) * np.kron(np.eye(2), PAULIS[a]) / 4.0
    return rho


def _psd_floor(rho: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Project onto strictly positive states (eigenvalue floor, retrace)."""
    rho = (rho + rho.conj().T) / 2.0
    eigs, vecs = np.linalg.eigh(rho)
    eigs = np.clip(eigs, floor, None)
    rho = (vecs * eigs) @ vecs.conj().T
    return rho / np.trace(rho).real


def _lower_triangular_factor(rho: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T†T = rho (Cholesky with reversed ordering)."""
    flip = np.eye(4)[::-1]
    chol = np.linalg.cholesky(flip @ rho @ flip)
    upper = flip @ chol @ flip
    return upper.conj().T


_LOWER_IDX = [(r, c) for r in range(4) for c in range(r)]


def _params_to_t(params: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        t[i, i] = params[i]
    for k, (r, c) in enumerate(_LOWER_IDX):
        t[r, c] = params[4 + 2 * k] + 1.0j * params[5 + 2 * k]
    return t


def _t_to_params(t: np.ndarray) -> np.ndarray:
    params = np.zeros(16)
    for i in range(4):
        params[i] = t[i, i].real
    for k, (r, c) in enumerate(_LOWER_IDX):
        params[4 + 2 * k] = t[r, c].real
        params[5 + 2 * k] = t[r, c].imag
    return params


def _stack_projectors() -> np.ndarray:
    return np.stack([p for s in SETTINGS for p in setting_projectors(s)])


_PROJECTORS = _stack_projectors()


def _log_likelihood_and_grad(params: np.ndarray, counts: np.ndarray):
    """Poisson log-likelihood (intensity profiled out) and its gradient."""
    t = _params_to_t(params)
    a = t.conj().T @ t
    trace = float(np.real(np.trace(a)))
    q = np.real(np.einsum("kij,ji->k", _PROJECTORS, a))
    q = np.clip(q, 1e-300, None)
    n_total = counts.sum()
    logl = float(counts @ np.log(q) - n_total * math.log(trace))
    # d q_k / dT = 2 T Pi_k (real part for Re-params, imag part for Im-params)
    weights = counts / q
    weighted_pi = np.einsum("k,kij->ij", weights, _PROJECTORS)
    grad_matrix = 2.0 * t @ weighted_pi - (2.0 * n_total / trace) * t
    grad = np.zeros(16)
    for i in range(4):
        grad[i] = grad_matrix[i, i].real
    for k, (r, c) in enumerate(_LOWER_IDX):
        grad[4 + 2 * k] = grad_matrix[r, c].real
        grad[5 + 2 * k] = grad_matrix[r, c].imag
    return logl, grad


@dataclass(frozen=True)
class MleResult:
    """Reconstruction output: state, likelihood and iteration diagnostics."""

    rho: np.ndarray
    log_likelihood: float
    iterations: int
    history: tuple[float, ...] | None = None


def mle_reconstruct(table: CountTable, keep_history: bool = False) -> MleResult:
    """Maximum-likelihood density matrix from coincidence counts.

    Deterministic gradient ascent with step halving on the 16 real
    parameters of the lower-triangular factor, started from the
    PSD-projected linear inversion, until the relative log-likelihood
    improvement drops below 1e-10.
    """
    missing = [s for s in SETTINGS if s not in set(table.settings_present())]
    if missing:
        raise ValueError(f"count table is missing settings: {missing}")
    coincidences = table.coincidence_matrix()
    counts = coincidences.reshape(-1)
    if counts.sum() == 0:
        raise ValueError("all coincidence counts are zero; cannot reconstruct")

    rho0 = _psd_floor(_linear_inversion(coincidences))
    params = _t_to_params(_lower_triangular_factor(rho0))

    logl, grad = _log_likelihood_and_grad(params, counts)
    step = 1.0 / max(1.0, counts.sum())
    iterations = 0
    converged = False
    history = [logl] if keep_history else None
    while iterations < MAX_ITERATIONS:
        iterations += 1
        improved = False
        while step > 1e-300:
            trial = params + step * grad
            trial_logl, trial_grad = _log_likelihood_and_grad(trial, counts)
            if np.isfinite(trial_logl) and trial_logl > logl:
                improvement = trial_logl - logl
                params, logl, grad = trial, trial_logl, trial_grad
                if history is not None:
                    history.append(logl)
                step *= 1.6
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        if improvement < LOG_LIKELIHOOD_TOL * max(1.0, abs(logl)):
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"likelihood ascent did not converge within {MAX_ITERATIONS} iterations "
            f"(last log-likelihood {logl:.6f})"
        )

    t = _params_to_t(params)
    rho = t.conj().T @ t
    rho = rho / np.trace(rho).real
    rho = (rho + rho.conj().T) / 2.0
    return MleResult(
        rho=rho,
        log_likelihood=logl,
        iterations=iterations,
        history=tuple(history) if history is not None else None,
    )


def _euler_unitary(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Single-qubit rotation Rz(alpha) Ry(beta) Rz(gamma)."""

    def rz(a):
        return np.array([[np.exp(-0.5j * a), 0.0], [0.0, np.exp(0.5j * a)]])

    def ry(b):
        c, s = math.cos(b / 2.0), math.sin(b / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)

    return rz(alpha) @ ry(beta) @ rz(gamma)


def _clifford_angles() -> list[tuple[float, float, float]]:
    """Euler angles of the 24 single-qubit Clifford rotations (octahedral group)."""
    angles = []
    half = math.pi / 2.0
    for alpha in (0.0, half, math.pi, 3.0 * half):
        for beta in (0.0, half, math.pi, 3.0 * half):
            angles.append((alpha, beta, 0.0))
    for alpha in (0.0, half, math.pi, 3.0 * half):
        for beta in (half, 3.0 * half):
            angles.append((alpha, beta, half))
    return angles


def optimize_local_fidelity(
    rho: np.ndarray, starts: Sequence[np.ndarray] | None = None
) -> tuple[float, tuple[np.ndarray, np.ndarray], np.ndarray]:
    """Maximize <phi+|(U1 x U2) rho (U1 x U2)†|phi+> over local unitaries.

    Deterministic multi-start local search: Nelder-Mead over the six Euler
    angles, by default from each of the 24 axis-aligned (Clifford) starting
    rotations on arm 1.  Returns the fidelity, the per-arm unitaries and
    the best angle vector (reusable as a warm start).
    """
    rho = check_density_matrix(rho)

    def objective(angles: np.ndarray) -> float:
        u = np.kron(_euler_unitary(*angles[:3]), _euler_unitary(*angles[3:]))
        return -float(np.real(PHI_PLUS.conj() @ u @ rho @ u.conj().T @ PHI_PLUS))

    if starts is None:
        starts = [np.array(list(a) + [0.0, 0.0, 0.0]) for a in _clifford_angles()]
    best_val = math.inf
    best_angles = None
    for x0 in starts:
        res = minimize(
            objective,
            np.asarray(x0, dtype=float),
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 2000},
        )
        if res.fun < best_val:
            best_val = res.fun
            best_angles = res.x
    u1 = _euler_unitary(*best_angles[:3])
    u2 = _euler_unitary(*best_angles[3:])
    return -best_val, (u1, u2), best_angles


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    std: float
    n_samples: int
    n_failures: int


def _poisson_resample(table: CountTable, rng: np.random.Generator) -> CountTable:
    out = CountTable(ratio=table.ratio)
    for (setting, pattern), count in sorted(table.counts.items()):
        out.add(setting, pattern, int(rng.poisson(count)))
    return out


def monte_carlo_report(
    table: CountTable,
    n_samples: int,
    seed: int,
    functionals: Mapping[str, Callable[[np.ndarray], float]],
    resampler: Callable[[CountTable, np.random.Generator], CountTable] = _poisson_resample,
) -> dict[str, MonteCarloResult]:
    """Propagate Poissonian count errors through reconstruction.

    Each sample resamples every count, reconstructs once, and evaluates all
    functionals; failed reconstructions are counted and skipped.
    """
    if n_samples < 2:
        raise ValueError("need at least two Monte Carlo samples")
    streams = np.random.SeedSequence(seed).spawn(n_samples)
    values: dict[str, list[float]] = {name: [] for name in functionals}
    failures = 0
    for stream in streams:
        rng = np.random.Generator(np.random.Philox(stream))
        resampled = resampler(table, rng)
        try:
            result = mle_reconstruct(resampled)
        except (ValueError, ConvergenceError):
            failures += 1
            continue
        for name, fn in functionals.items():
            values[name].append(float(fn(result.rho)))
    report = {}
    for name, vals in values.items():
        if len(vals) < 2:
            raise ConvergenceError(
                f"only {len(vals)} of {n_samples} Monte Carlo samples reconstructed"
            )
        arr = np.array(vals)
        report[name] = MonteCarloResult(
            mean=float(arr.mean()),
            std=float(arr.std(ddof=1)),
            n_samples=len(vals),
            n_failures=failures,
        )
    return report


def monte_carlo_errors(
    table: CountTable,
    n_samples: int,
    seed: int,
    functional: Callable[[np.ndarray], float],
    resampler: Callable[[CountTable, np.random.Generator], CountTable] = _poisson_resample,
) -> MonteCarloResult:
    """Mean and standard deviation of one functional over resampled tables."""
    return monte_carlo_report(
        table, n_samples, seed, {"value": functional}, resampler
    )["value"]
