"""Estimators for the quasi-stationary distribution and its decay rate.

The workhorse is an interacting-ensemble estimator: particles follow the
killed dynamics and every killed particle instantly restarts from a
uniformly chosen survivor, so the ensemble tracks the conditioned law and
the kill rate estimates the decay rate.  Rejection-based conditioning
(exact in law) is kept for short horizons: conditioned-law distances and
eigenfunction probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ExtinctionError, NumericalError, UsageError
from .killed_sim import Domain, em_propose, evolve_killed_batch, noise_dim
from .processes import ProcessSpec, State
from .rngstreams import stream


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


@dataclass
class Histogram:
    edges: np.ndarray
    mass: np.ndarray

    def rows(self):
        for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.mass):
            yield (float(lo), float(hi), float(m))

    @staticmethod
    def of(values: np.ndarray, edges: np.ndarray) -> "Histogram":
        counts, _ = np.histogram(values, bins=edges)
        total = counts.sum()
        mass = counts / total if total else counts.astype(float)
        return Histogram(edges=np.asarray(edges, dtype=float), mass=mass)


def binned_tv_distance(a: Histogram, b: Histogram) -> float:
    if a.edges.shape != b.edges.shape or not np.allclose(a.edges, b.edges):
        raise UsageError("histograms must share their binning")
    return 0.5 * float(np.abs(a.mass - b.mass).sum())


@dataclass(frozen=True)
class Binning:
    """Declared marginal binning of the absorbing region."""

    x_edges: np.ndarray
    v_edges: np.ndarray

    @staticmethod
    def regular(x_lo, x_hi, v_lo, v_hi, n_bins=40) -> "Binning":
        return Binning(
            x_edges=np.linspace(x_lo, x_hi, n_bins + 1),
            v_edges=np.linspace(v_lo, v_hi, n_bins + 1),
        )


# ---------------------------------------------------------------------------
# interacting ensemble
# ---------------------------------------------------------------------------


@dataclass
class Ensemble:
    """Resampling ensemble state, continuable deterministically in-process."""

    x: np.ndarray
    v: np.ndarray
    aux: np.ndarray
    clock: float
    kill_history: List[int] = field(default_factory=list)
    rng: Optional[np.random.Generator] = None

    @property
    def n_particles(self) -> int:
        return self.x.shape[0]


@dataclass
class QSDReport:
    lambda_hat: float
    lambda_ci: tuple
    n_particles: int
    dt: float
    t_burnin: float
    t_sample: float
    total_kills: int
    hist_x: List[Histogram]
    hist_v: List[Histogram]
    diagnostics: dict
    phi_probes: List[dict] = field(default_factory=list)

    def as_dict(self):
        return {
            "lambda_hat": self.lambda_hat,
            "lambda_ci": list(self.lambda_ci),
            "n_particles": self.n_particles,
            "dt": self.dt,
            "t_burnin": self.t_burnin,
            "t_sample": self.t_sample,
            "total_kills": self.total_kills,
            "diagnostics": self.diagnostics,
            "phi_probes": self.phi_probes,
        }


def _resample_killed(killed_idx, alive_idx, x, v, aux, rng):
    """Classical uniform resampling, serial in particle-index order."""
    for i in killed_idx:
        donor = alive_idx[rng.integers(0, len(alive_idx))]
        x[i] = x[donor]
        v[i] = v[donor]
        aux[i] = aux[donor]


def _fv_run(
    proc: ProcessSpec,
    domain: Domain,
    x,
    v,
    aux,
    dt: float,
    duration: float,
    rng,
    hist_accum=None,
    hist_every: int = 5,
    kill_batches: Optional[list] = None,
    batch_duration: float = 0.0,
):
    """Advance the resampling ensemble for ``duration``; mutates the arrays."""
    n = x.shape[0]
    nd = noise_dim(proc)
    steps = int(round(duration / dt))
    kills = 0
    t_in_batch = 0.0
    batch_kills = 0
    for k in range(steps):
        noise = rng.standard_normal((n, nd))
        x1, v1, a1 = em_propose(proc, x, v, aux, dt, noise)
        bad = ~(np.all(np.isfinite(x1), axis=1) & np.all(np.isfinite(v1), axis=1))
        inside = domain.contains(x1) & ~bad
        killed_idx = np.flatnonzero(~inside)
        alive_idx = np.flatnonzero(inside)
        if len(alive_idx) == 0:
            raise ExtinctionError(
                f"all {n} particles were killed in one step at clock offset "
                f"{k * dt:.6g}; reduce dt"
            )
        x[alive_idx] = x1[alive_idx]
        v[alive_idx] = v1[alive_idx]
        aux[alive_idx] = a1[alive_idx]
        if len(killed_idx):
            _resample_killed(killed_idx, alive_idx, x, v, aux, rng)
            kills += len(killed_idx)
            batch_kills += len(killed_idx)
        if hist_accum is not None and (k + 1) % hist_every == 0:
            hist_accum(x, v)
        if kill_batches is not None:
            t_in_batch += dt
            if t_in_batch >= batch_duration - 1e-12:
                kill_batches.append(batch_kills)
                batch_kills = 0
                t_in_batch = 0.0
    return kills


def fleming_viot(
    proc: ProcessSpec,
    domain: Domain,
    n_particles: int,
    dt: float,
    t_burnin: float,
    t_sample: float,
    rng_seed: int,
    init_sampler: Callable,
    binning: Binning,
    n_batches: int = 20,
    hist_every: int = 5,
) -> tuple:
    """Run the resampling estimator; returns (QSDReport, Ensemble).

    lambda_hat is the kill count per particle per unit time over the
    sampling window, with a batch-means confidence interval; the empirical
    measure is the time average of per-coordinate marginal histograms.
    """
    if n_particles < 10:
        raise UsageError("the resampling estimator needs at least 10 particles")
    if dt <= 0 or t_sample <= 0 or t_burnin < 0:
        raise UsageError("dt and t_sample must be positive, t_burnin nonnegative")
    rng = stream(rng_seed, "fleming_viot", 0)
    x, v, aux = init_sampler(rng, n_particles)
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    aux = np.array(aux, dtype=float)
    if not np.all(domain.contains(x)):
        raise UsageError("initial ensemble must be supported inside O")

    dim = proc.dim
    x_counts = [np.zeros(len(binning.x_edges) - 1) for _ in range(dim)]
    v_counts = [np.zeros(len(binning.v_edges) - 1) for _ in range(dim)]
    halves = [list(), list()]  # first/second half x-counts for stationarity gap
    accum_calls = [0]
    sample_steps = int(round(t_sample / dt))
    half_mark = sample_steps // (2 * hist_every)

    def hist_accum(xa, va):
        accum_calls[0] += 1
        for c in range(dim):
            cx, _ = np.histogram(xa[:, c], bins=binning.x_edges)
            cv, _ = np.histogram(va[:, c], bins=binning.v_edges)
            x_counts[c] += cx
            v_counts[c] += cv
            if c == 0:
                (halves[0] if accum_calls[0] <= half_mark else halves[1]).append(cx)

    _fv_run(proc, domain, x, v, aux, dt, t_burnin, rng)
    kill_batches: list = []
    kills = _fv_run(
        proc,
        domain,
        x,
        v,
        aux,
        dt,
        t_sample,
        rng,
        hist_accum=hist_accum,
        hist_every=hist_every,
        kill_batches=kill_batches,
        batch_duration=t_sample / n_batches,
    )
    lam = kills / (n_particles * t_sample)
    batch_rates = np.array(kill_batches, dtype=float) / (n_particles * (t_sample / n_batches))
    if len(batch_rates) >= 2:
        half_width = 1.96 * batch_rates.std(ddof=1) / math.sqrt(len(batch_rates))
    else:
        half_width = float("nan")
    hx = [Histogram(binning.x_edges, c / c.sum() if c.sum() else c) for c in x_counts]
    hv = [Histogram(binning.v_edges, c / c.sum() if c.sum() else c) for c in v_counts]
    gap = _stationarity_gap(halves, binning.x_edges)
    mean_batch = batch_rates.mean() * (n_particles * (t_sample / n_batches))
    var_batch = np.var(np.array(kill_batches, dtype=float), ddof=1) if len(kill_batches) > 1 else 0.0
    overdispersion = var_batch / mean_batch if mean_batch > 0 else 1.0
    ess_kills = kills / max(overdispersion, 1.0) if kills else 0.0
    report = QSDReport(
        lambda_hat=float(lam),
        lambda_ci=(float(lam - half_width), float(lam + half_width)),
        n_particles=n_particles,
        dt=dt,
        t_burnin=t_burnin,
        t_sample=t_sample,
        total_kills=int(kills),
        hist_x=hx,
        hist_v=hv,
        diagnostics={
            "resampling_rate_per_particle": float(lam),
            "kill_count_ess": float(ess_kills),
            "kill_batch_overdispersion": float(overdispersion),
            "stationarity_gap_tv": gap,
            "hist_snapshots": int(accum_calls[0]),
        },
    )
    ens = Ensemble(x=x, v=v, aux=aux, clock=t_burnin + t_sample, kill_history=kill_batches, rng=rng)
    return report, ens


def _stationarity_gap(halves, edges):
    if not halves[0] or not halves[1]:
        return float("nan")
    a = np.sum(halves[0], axis=0).astype(float)
    b = np.sum(halves[1], axis=0).astype(float)
    if a.sum() == 0 or b.sum() == 0:
        return float("nan")
    return 0.5 * float(np.abs(a / a.sum() - b / b.sum()).sum())


def continue_fleming_viot(
    ens: Ensemble,
    proc: ProcessSpec,
    domain: Domain,
    dt: float,
    duration: float,
    binning: Binning,
    hist_every: int = 5,
) -> Histogram:
    """Propagate a stationary ensemble further; time-averaged x-marginal.

    Used by the fixed-point check: extra propagation plus conditioning must
    leave the binned marginal unchanged up to sampling noise.
    """
    if ens.rng is None:
        raise UsageError("ensemble does not carry a live random stream")
    counts = np.zeros(len(binning.x_edges) - 1)

    def accum(xa, va):
        c, _ = np.histogram(xa[:, 0], bins=binning.x_edges)
        counts[:] += c

    _fv_run(proc, domain, ens.x, ens.v, ens.aux, dt, duration, ens.rng,
            hist_accum=accum, hist_every=hist_every)
    ens.clock += duration
    total = counts.sum()
    return Histogram(binning.x_edges, counts / total if total else counts)


# ---------------------------------------------------------------------------
# decay-rate regression
# ---------------------------------------------------------------------------


@dataclass
class DecayEstimate:
    lambda_hat: float
    ci: tuple
    window: tuple
    n_points: int
    curvature_flag: bool
    flags: list

    def as_dict(self):
        return {
            "lambda_hat": self.lambda_hat,
            "ci": list(self.ci),
            "window": list(self.window),
            "n_points": self.n_points,
            "curvature_flag": self.curvature_flag,
            "flags": self.flags,
        }


def estimate_decay_rate(table, min_survivors: int = 30) -> DecayEstimate:
    """Weighted least squares of log survival over the tail window.

    The window is the last half of grid points still holding at least
    ``min_survivors`` survivors; weights are the inverse delta-method
    variances of log p-hat.  A significant quadratic term flags curvature.
    """
    t = np.asarray(table.times, dtype=float)
    s = np.asarray(table.survivors, dtype=float)
    n = float(table.n)
    usable = s >= min_survivors
    if usable.sum() < 5:
        raise UsageError("need at least five grid points with enough survivors")
    idx = np.flatnonzero(usable)
    window_idx = idx[len(idx) // 2 :]
    if len(window_idx) < 3:
        window_idx = idx[-3:]
    tt = t[window_idx]
    p = np.clip(s[window_idx] / n, 1e-12, 1.0 - 0.5 / n)
    y = np.log(p)
    w = n * p / (1.0 - p)
    flags = []
    if np.all(s == s[0]) and s[0] == n:
        return DecayEstimate(0.0, (0.0, 0.0), (float(tt[0]), float(tt[-1])),
                             len(tt), False, ["no decay"])
    slope, intercept, var_slope = _wls_line(tt, y, w)
    lam = -slope
    half = 1.96 * math.sqrt(max(var_slope, 0.0))
    curvature = _curvature_significant(tt, y, w)
    if lam <= 0:
        flags.append("no decay")
    return DecayEstimate(
        lambda_hat=float(lam),
        ci=(float(lam - half), float(lam + half)),
        window=(float(tt[0]), float(tt[-1])),
        n_points=len(tt),
        curvature_flag=curvature,
        flags=flags,
    )


def _wls_line(t, y, w):
    W = np.diag(w)
    X = np.column_stack([np.ones_like(t), t])
    cov = np.linalg.inv(X.T @ W @ X)
    beta = cov @ (X.T @ W @ y)
    resid = y - X @ beta
    dof = max(len(t) - 2, 1)
    scale = float(resid @ (w * resid)) / dof
    return float(beta[1]), float(beta[0]), float(cov[1, 1] * max(scale, 1.0))


def _curvature_significant(t, y, w) -> bool:
    if len(t) < 4:
        return False
    X = np.column_stack([np.ones_like(t), t, t**2])
    W = np.diag(w)
    try:
        cov = np.linalg.inv(X.T @ W @ X)
    except np.linalg.LinAlgError:
        return False
    beta = cov @ (X.T @ W @ y)
    resid = y - X @ beta
    dof = max(len(t) - 3, 1)
    scale = float(resid @ (w * resid)) / dof
    se = math.sqrt(max(cov[2, 2] * max(scale, 1.0), 1e-300))
    return abs(beta[2]) > 2.0 * se


# ---------------------------------------------------------------------------
# conditioned-law convergence (rejection based, exact in law)
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceResult:
    times: np.ndarray
    distances: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    noise_floor: np.ndarray
    rate_hat: float
    rate_ci: tuple
    fit_window: tuple
    flags: list

    def rows(self):
        for row in zip(self.times, self.distances, self.n1, self.n2, self.noise_floor):
            yield tuple(float(r) for r in row)

    def as_dict(self):
        return {
            "rate_hat": self.rate_hat,
            "rate_ci": list(self.rate_ci),
            "fit_window": list(self.fit_window),
            "flags": self.flags,
        }


def conditional_convergence(
    proc: ProcessSpec,
    domain: Domain,
    nu1: Callable,
    nu2: Callable,
    time_grid: Sequence[float],
    n_traj: int,
    rng_seed: int,
    dt: float,
    x_edges: np.ndarray,
    min_survivors: int = 100,
) -> ConvergenceResult:
    """Binned TV distance between two conditioned laws, with a fitted rate.

    Both ensembles use rejection conditioning (survivors only), so the
    sampled laws are exact; the fit runs on the window where both keep at
    least ``min_survivors`` survivors and the distance clears twice the
    binomial noise floor.
    """
    time_grid = np.asarray(sorted(time_grid), dtype=float)
    if np.any(time_grid <= 0):
        raise UsageError("time grid must be strictly positive")
    obs = []
    for tag, sampler in (("nu1", nu1), ("nu2", nu2)):
        rng = stream(rng_seed, f"converge-{tag}", 0)
        x, v, aux = sampler(rng, n_traj)
        out = evolve_killed_batch(
            proc, domain, x, v, aux, dt, float(time_grid[-1]), rng,
            observe_times=time_grid,
        )
        obs.append(out.observations)
    dists, n1s, n2s, floors = [], [], [], []
    for (t1, alive1, x1), (t2, alive2, x2) in zip(*obs):
        n1, n2 = int(alive1.sum()), int(alive2.sum())
        n1s.append(n1)
        n2s.append(n2)
        if n1 == 0 or n2 == 0:
            dists.append(float("nan"))
            floors.append(float("nan"))
            continue
        h1 = Histogram.of(x1[alive1, 0], x_edges)
        h2 = Histogram.of(x2[alive2, 0], x_edges)
        dists.append(binned_tv_distance(h1, h2))
        pbar = 0.5 * (h1.mass + h2.mass)
        floors.append(
            0.5
            * math.sqrt(2.0 / math.pi)
            * float(np.sum(np.sqrt(np.clip(pbar * (1 - pbar), 0, None))))
            * math.sqrt(1.0 / n1 + 1.0 / n2)
        )
    dists = np.array(dists)
    floors = np.array(floors)
    n1s = np.array(n1s)
    n2s = np.array(n2s)
    ok = (
        (n1s >= min_survivors)
        & (n2s >= min_survivors)
        & np.isfinite(dists)
        & (dists > 2.0 * floors)
    )
    flags = []
    if ok.sum() < 3:
        flags.append("insufficient usable points for a rate fit")
        rate, ci, window = float("nan"), (float("nan"), float("nan")), (0.0, 0.0)
    else:
        tt = time_grid[ok]
        yy = np.log(dists[ok])
        slope, _, var_slope = _wls_line(tt, yy, np.ones_like(tt))
        rate = -slope
        half = 1.96 * math.sqrt(max(var_slope, 0.0))
        ci = (rate - half, rate + half)
        window = (float(tt[0]), float(tt[-1]))
        if rate <= 0:
            flags.append("no positive decay rate detected")
    return ConvergenceResult(
        times=time_grid,
        distances=dists,
        n1=n1s,
        n2=n2s,
        noise_floor=floors,
        rate_hat=float(rate),
        rate_ci=(float(ci[0]), float(ci[1])),
        fit_window=window,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# eigenfunction probes
# ---------------------------------------------------------------------------


def phi_probe(
    proc: ProcessSpec,
    domain: Domain,
    probe_states: Sequence[State],
    t_probe: float,
    n_traj: int,
    lambda_hat: float,
    rng_seed: int,
    dt: float,
) -> List[dict]:
    """phi-hat(s) = exp(lambda t) * survivor fraction, first probe = 1."""
    if t_probe <= 0 or n_traj < 1:
        raise UsageError("t_probe must be positive and n_traj >= 1")
    raw = []
    for i, s in enumerate(probe_states):
        rng = stream(rng_seed, "phi_probe", i)
        x = np.tile(s.x, (n_traj, 1))
        v = np.tile(s.v, (n_traj, 1))
        aux = np.tile(s.aux, (n_traj, 1))
        out = evolve_killed_batch(proc, domain, x, v, aux, dt, t_probe, rng)
        survivors = int(np.isinf(out.exit_times).sum())
        if survivors == 0:
            raise NumericalError(
                f"zero survivors at probe {i}; increase n_traj or reduce t_probe"
            )
        frac = survivors / n_traj
        raw.append(
            {
                "x": s.x.tolist(),
                "v": s.v.tolist(),
                "survivors": survivors,
                "fraction": frac,
                "phi_hat": math.exp(lambda_hat * t_probe) * frac,
                "stderr": math.exp(lambda_hat * t_probe)
                * math.sqrt(frac * (1 - frac) / n_traj),
            }
        )
    ref = raw[0]["phi_hat"]
    for entry in raw:
        entry["phi_hat"] /= ref
        entry["stderr"] /= ref
    return raw
