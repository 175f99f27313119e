"""Disorder-ensemble estimators built on the transfer tables.

Every estimator here draws its charge replicas from the counter-based
streams in the disorder module and reduces them in fixed replica order,
so a given (seed, configuration) pair yields bit-identical results no
matter how many workers run or in what order replicas are processed.
Results are frozen dataclasses.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .disorder import (DOMAIN_PATHS, DisorderLaw, DisorderSample, log_mgf,
                       philox_stream, sample)
from .engine import (ModelParams, backward_table, conditional_profile,
                     contact_profile, forward_table, sample_path)
from .kernels import RenewalKernel

ENUMERATION_LIMIT = 16


@dataclasses.dataclass(frozen=True)
class EstimateWithError:
    """A replica average together with its standard error."""

    mean: float
    stderr: float
    replicas: int
    N: int

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("need at least two replicas")
        if self.N < 1:
            raise ValueError("N must be positive")
        if not self.stderr >= 0.0:
            raise ValueError("stderr must be nonnegative")


@dataclasses.dataclass(frozen=True)
class TailFlaggedEstimate(EstimateWithError):
    """Estimate that records how top-heavy its replica reduction was.

    max_replica_share is the largest single replica's fraction of the
    exponential sum behind the mean.  When it exceeds one half, a single
    draw dominates the average and the error bar cannot be trusted.
    """

    max_replica_share: float

    @property
    def unreliable(self) -> bool:
        return self.max_replica_share > 0.5


@dataclasses.dataclass(frozen=True)
class CriticalPointEstimate:
    """Threshold-crossing location of the localization transition.

    h_c is the midpoint of the final bisection bracket at the largest
    system size; h_c_by_N traces the same protocol across the whole size
    sequence so the finite-size drift is visible rather than hidden.
    err adds, conservatively: the final bracket width, a geometric-sum
    allowance for the remaining finite-size drift (the last drift step
    scaled by r/(1-r), where r is the measured contraction of
    consecutive steps, capped at 9 when the steps do not contract), and
    the statistical width of the crossing (four endpoint standard
    errors divided by the measured slope of the free energy across the
    bracket).
    """

    h_c: float
    bracket: tuple[float, float]
    N_sequence: tuple[int, ...]
    threshold: float
    h_c_by_N: tuple[float, ...]
    drift: float
    stat_err: float
    err: float

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo <= self.h_c <= hi:
            raise ValueError("bracket must contain the estimate")
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")


@dataclasses.dataclass(frozen=True)
class CorrelationReport:
    """Two decay lengths of the pair correlation, with fit diagnostics.

    xi_typical comes from averaging per-replica slopes of log |C|;
    xi_average from the slope of the log of the replica-averaged |C|.
    Averaging before taking logs weights the rare replicas with large
    |C| more heavily, which is why xi_average >= xi_typical up to fit
    noise.  rate_* fields are the fitted decay rates 1/xi.
    """

    xi_typical: float
    xi_average: float
    mu: TailFlaggedEstimate
    free_energy: EstimateWithError
    rate_typical: float
    rate_typical_stderr: float
    rate_average: float
    average_fit_r_squared: float
    anchor: int
    k_window: tuple[int, int]
    replicas: int
    N: int
    mean_abs_profile: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.xi_typical > 0.0 and self.xi_average > 0.0):
            raise ValueError("decay lengths must be positive")


@dataclasses.dataclass(frozen=True)
class GapReport:
    """Largest-gap statistics from one sampled path per replica.

    ratios holds the per-replica largest gap divided by log N; their
    median times the mu estimate is near one when the longest excursion
    scales like (log N) / mu.
    """

    ratios: tuple[float, ...]
    median_ratio: float
    median_times_mu: float
    mu: TailFlaggedEstimate
    free_energy: EstimateWithError
    replicas: int
    N: int


@dataclasses.dataclass(frozen=True)
class ContactGrowthReport:
    """Growth of the mean contact number along a size grid at criticality.

    exponent is the least-squares slope of log(mean contacts) against
    log N.  The two ceiling flags compare it, with 0.1 slack, against
    the universal 2/3 cap and against 2a/(1+a) for tail index a, the
    cap that applies when disorder does not shift the transition.
    """

    N_grid: tuple[int, ...]
    mean_contacts: tuple[float, ...]
    contacts_stderr: tuple[float, ...]
    exponent: float
    intercept: float
    r_squared: float
    irrelevance_ceiling: float
    within_general_ceiling: bool
    within_irrelevance_ceiling: bool
    replicas: int
    beta: float
    h: float


def _replica_log_partitions(kernel: RenewalKernel, law: DisorderLaw,
                            params: ModelParams, N: int, replicas: int,
                            seed: int) -> np.ndarray:
    """logZ for each replica, in replica order.

    At beta = 0 the site weights do not depend on the charges, so one
    table serves all replicas; the returned values are identical bit
    for bit to what the generic loop would produce.
    """
    if replicas < 2:
        raise ValueError("need at least two replicas")
    if params.beta == 0.0:
        s = sample(law, N, seed, 0)
        logz = forward_table(kernel, s, params, N).logZ[N]
        return np.full(replicas, logz)
    out = np.empty(replicas)
    for r in range(replicas):
        s = sample(law, N, seed, r)
        out[r] = forward_table(kernel, s, params, N).logZ[N]
    return out


def _shifted_exp_stats(values: np.ndarray) -> tuple[float, np.ndarray, float]:
    """max, exp(values - max), and the sum of those masses."""
    vmax = float(np.max(values))
    with np.errstate(under="ignore"):
        mass = np.exp(values - vmax)
    return vmax, mass, float(np.sum(mass))


def _free_energy_from_logz(logz: np.ndarray, N: int) -> EstimateWithError:
    f = logz / N
    replicas = logz.size
    mean = float(np.mean(f))
    stderr = float(np.std(f, ddof=1)) / math.sqrt(replicas)
    return EstimateWithError(mean=mean, stderr=stderr,
                             replicas=replicas, N=N)


def _mu_from_logz(logz: np.ndarray, N: int) -> TailFlaggedEstimate:
    replicas = logz.size
    t = -logz
    tmax, mass, total = _shifted_exp_stats(t)
    # log of the replica mean of 1/Z, written so that identical replicas
    # give back logZ exactly (log(total) - log(replicas) is then 0.0)
    log_mean = tmax + (math.log(total) - math.log(replicas))
    mean = -log_mean / N
    # delta method: var(log X-bar) ~ var(X) / (replicas * X-bar^2)
    d = np.expm1(t - log_mean)
    rel_var = float(d @ d) / (replicas - 1)
    stderr = math.sqrt(rel_var / replicas) / N
    share = float(np.max(mass)) / total
    return TailFlaggedEstimate(mean=mean, stderr=stderr, replicas=replicas,
                               N=N, max_replica_share=share)


def quenched_free_energy(kernel: RenewalKernel, law: DisorderLaw,
                         params: ModelParams, N: int, replicas: int,
                         seed: int) -> EstimateWithError:
    """Replica mean of (1/N) log Z with its standard error."""
    logz = _replica_log_partitions(kernel, law, params, N, replicas, seed)
    return _free_energy_from_logz(logz, N)


def mu_estimate(kernel: RenewalKernel, law: DisorderLaw, params: ModelParams,
                N: int, replicas: int, seed: int) -> TailFlaggedEstimate:
    """-(1/N) log of the replica mean of 1/Z, with a delta-method error.

    Caveat: 1/Z has heavy tails under the charge distribution, so a few
    atypical replicas can dominate the mean and the delta-method stderr
    can be a serious underestimate.  The returned max_replica_share
    makes this visible; treat runs with share above one half (see
    TailFlaggedEstimate.unreliable) as unconverged.
    """
    logz = _replica_log_partitions(kernel, law, params, N, replicas, seed)
    return _mu_from_logz(logz, N)


def second_moment_ratio(kernel: RenewalKernel, law: DisorderLaw,
                        params: ModelParams, N: int, replicas: int,
                        seed: int) -> EstimateWithError:
    """(replica mean of Z)^2 / (replica mean of Z^2), in log domain.

    The standard error comes from a leave-one-out (jackknife) pass over
    the replicas, which respects how nonlinear the statistic is.
    """
    logz = _replica_log_partitions(kernel, law, params, N, replicas, seed)
    R = logz.size
    zmax, mass, total1 = _shifted_exp_stats(logz)
    sq = mass * mass
    total2 = float(np.sum(sq))
    # the shift zmax cancels in 2 log(mean Z) - log(mean Z^2)
    log_ratio = 2.0 * math.log(total1) - math.log(total2) - math.log(R)
    mean = math.exp(log_ratio)

    loo = np.empty(R)
    for r in range(R):
        t1 = total1 - mass[r]
        t2 = total2 - sq[r]
        if t1 <= 0.0 or t2 <= 0.0:
            loo[r] = 0.0
            continue
        loo[r] = math.exp(2.0 * math.log(t1) - math.log(t2)
                          - math.log(R - 1))
    center = float(np.mean(loo))
    stderr = math.sqrt((R - 1) / R * float(np.sum((loo - center) ** 2)))
    return EstimateWithError(mean=mean, stderr=stderr, replicas=R, N=N)


def second_moment_ratio_enumerated(kernel: RenewalKernel,
                                   params: ModelParams, N: int) -> float:
    """Exact (E Z)^2 / E[Z^2] for coin-flip charges by full enumeration.

    Walks all 2^N sign sequences, weighting each equally and computing
    its logZ with the transfer recursion.  Exponential in N, so sizes
    above ENUMERATION_LIMIT are refused.
    """
    if not 1 <= N <= ENUMERATION_LIMIT:
        raise ValueError(f"full enumeration needs 1 <= N <= "
                         f"{ENUMERATION_LIMIT}, got {N}")
    law = DisorderLaw("rademacher")
    bits = np.arange(N, dtype=np.int64)
    logzs = np.empty(1 << N)
    for idx in range(1 << N):
        signs = 1.0 - 2.0 * ((idx >> bits) & 1).astype(np.float64)
        s = DisorderSample(values=signs, seed=0, replica_index=idx, law=law)
        logzs[idx] = forward_table(kernel, s, params, N).logZ[N]
    _, mass, total1 = _shifted_exp_stats(logzs)
    total2 = float(np.sum(mass * mass))
    return math.exp(2.0 * math.log(total1) - math.log(total2) - N * math.log(2.0))


def locate_critical_point(kernel: RenewalKernel, law: DisorderLaw,
                          beta: float, N_sequence, threshold: float | None,
                          replicas: int, seed: int,
                          bisections: int = 16) -> CriticalPointEstimate:
    """Bisect h until the quenched free energy crosses a small threshold.

    The search interval is centered on the annealed critical point
    -log M(beta) and extends five units each way; the same protocol runs
    at every size in N_sequence so the drift of the crossing point with
    N is reported, and the quoted err combines bracket width, drift and
    statistical width.  All evaluations share one replica set (common
    random numbers), which keeps the bisection consistent because each
    replica's logZ is increasing in h.

    When threshold is None it defaults to ten times the larger endpoint
    standard error at the largest size, floored at 1e-12 so the
    noiseless beta = 0 case still gets a positive threshold.
    """
    sizes = tuple(int(n) for n in N_sequence)
    if len(sizes) < 3:
        raise ValueError("N_sequence needs at least three entries")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("N_sequence must be strictly increasing")
    if threshold is not None and not threshold > 0.0:
        raise ValueError("threshold must be positive")

    h_annealed = -log_mgf(law, beta)
    lo0, hi0 = h_annealed - 5.0, h_annealed + 5.0

    cache: dict[tuple[int, float], EstimateWithError] = {}

    def fe(n: int, h: float) -> EstimateWithError:
        key = (n, h)
        if key not in cache:
            cache[key] = quenched_free_energy(
                kernel, law, ModelParams(beta=beta, h=h), n, replicas, seed)
        return cache[key]

    if threshold is None:
        probe_lo = fe(sizes[-1], lo0)
        probe_hi = fe(sizes[-1], hi0)
        threshold = 10.0 * max(probe_lo.stderr, probe_hi.stderr) + 1e-12

    h_by_n = []
    final = None
    for n in sizes:
        f_lo, f_hi = fe(n, lo0), fe(n, hi0)
        if not f_lo.mean < threshold < f_hi.mean:
            raise ValueError(
                "free energy does not cross the threshold within five "
                "units of the annealed critical point")
        lo, hi = lo0, hi0
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            f_mid = fe(n, mid)
            if f_mid.mean > threshold:
                hi, f_hi = mid, f_mid
            else:
                lo, f_lo = mid, f_mid
        h_by_n.append(0.5 * (lo + hi))
        final = (lo, hi, f_lo, f_hi)

    lo, hi, f_lo, f_hi = final
    slope = (f_hi.mean - f_lo.mean) / (hi - lo)
    stat_err = 4.0 * max(f_lo.stderr, f_hi.stderr) / slope
    steps = [abs(b - a) for a, b in zip(h_by_n, h_by_n[1:])]
    drift = steps[-1]
    # drifts like N^-gamma contract geometrically along a doubling
    # sequence, so the distance still to go is about step * r / (1 - r)
    if steps[-2] > 0.0 and steps[-1] / steps[-2] < 0.9:
        r = steps[-1] / steps[-2]
        allowance = drift * r / (1.0 - r)
    else:
        allowance = drift * 9.0
    return CriticalPointEstimate(
        h_c=h_by_n[-1], bracket=(lo, hi), N_sequence=sizes,
        threshold=threshold, h_c_by_N=tuple(h_by_n), drift=drift,
        stat_err=stat_err, err=(hi - lo) + allowance + stat_err)


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, intercept, and R^2."""
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _require_localized(f: EstimateWithError) -> None:
    if not f.mean > 4.0 * f.stderr:
        raise ValueError(
            "refused: free energy estimate "
            f"{f.mean:.3e} +- {f.stderr:.3e} is not clearly positive, "
            "so these parameters are not in the localized phase")


def correlation_lengths(kernel: RenewalKernel, law: DisorderLaw,
                        params: ModelParams, N: int, k_grid, replicas: int,
                        seed: int,
                        prefactor_power: float = 0.0) -> CorrelationReport:
    """Fit the typical and averaged decay lengths of the pair correlation.

    For each replica the correlation C(anchor + k, anchor) is computed
    on the offsets in k_grid from an anchor chosen so the whole window
    sits in the bulk.  The typical rate averages per-replica slopes of
    log |C|; the averaged rate fits the log of the replica mean of |C|
    (mean first, log second).  Both logZ reductions come along for free,
    so the report carries the free energy and mu estimates for the same
    replica set.

    prefactor_power, when nonzero, divides |C(k)| by k**-prefactor_power
    before the log-linear fits.  Without disorder the correlation of a
    power-tail kernel decays like k**-(1+alpha) * exp(-k/xi), so a plain
    slope of log |C| overshoots the decay rate by about
    (1+alpha)/k; passing prefactor_power = 1 + alpha removes that known
    polynomial factor and lets moderate windows read off the exponential
    scale.  Leave it at zero when no prefactor model is trusted (e.g.
    per-replica correlations at beta > 0).  The stored mean_abs_profile
    is always the uncorrected replica mean of |C|.
    """
    if replicas < 2:
        raise ValueError("need at least two replicas")
    ks = np.asarray(k_grid, dtype=np.int64)
    if ks.size < 2 or np.any(np.diff(ks) <= 0):
        raise ValueError("k_grid must be strictly increasing, length >= 2")
    if ks[0] < 1 or ks[-1] > N // 2:
        raise ValueError("k_grid must lie in [1, N/2] so the measurement "
                         "window stays in the bulk")
    anchor = (N - int(ks[-1])) // 2

    logz = np.empty(replicas)
    profiles = np.empty((replicas, ks.size))
    for r in range(replicas):
        s = sample(law, N, seed, r)
        fwd = forward_table(kernel, s, params, N)
        back = backward_table(kernel, s, params, N)
        logz[r] = fwd.logZ[N]
        profiles[r] = conditional_profile(fwd, back, anchor, anchor + ks)

    free_energy = _free_energy_from_logz(logz, N)
    _require_localized(free_energy)

    abs_c = np.abs(profiles)
    kf = ks.astype(np.float64)
    log_correction = prefactor_power * np.log(kf)
    slopes = np.empty(replicas)
    for r in range(replicas):
        valid = abs_c[r] > 0.0
        if np.count_nonzero(valid) < 2:
            raise ValueError("correlation underflowed on almost the whole "
                             "window; shrink k_grid")
        slopes[r], _, _ = _fit_line(
            kf[valid], np.log(abs_c[r][valid]) + log_correction[valid])
    rate_typical = -float(np.mean(slopes))
    rate_typical_stderr = float(np.std(slopes, ddof=1)) / math.sqrt(replicas)

    mean_c = np.mean(abs_c, axis=0)
    valid = mean_c > 0.0
    if np.count_nonzero(valid) < 2:
        raise ValueError("averaged correlation underflowed; shrink k_grid")
    slope_avg, _, r2_avg = _fit_line(
        kf[valid], np.log(mean_c[valid]) + log_correction[valid])
    rate_average = -slope_avg

    if rate_typical <= 0.0 or rate_average <= 0.0:
        raise ValueError("fitted decay rates are not positive; the window "
                         "is too noisy or the phase is not localized")

    return CorrelationReport(
        xi_typical=1.0 / rate_typical, xi_average=1.0 / rate_average,
        mu=_mu_from_logz(logz, N), free_energy=free_energy,
        rate_typical=rate_typical, rate_typical_stderr=rate_typical_stderr,
        rate_average=rate_average, average_fit_r_squared=r2_avg,
        anchor=anchor, k_window=(int(ks[0]), int(ks[-1])),
        replicas=replicas, N=N,
        mean_abs_profile=tuple(float(v) for v in mean_c))


def gap_statistics(kernel: RenewalKernel, law: DisorderLaw,
                   params: ModelParams, N: int, replicas: int,
                   seed: int) -> GapReport:
    """Largest-gap distribution from one exact path draw per replica.

    Path randomness comes from a separate stream domain, so the charge
    sequences are the same ones every other estimator sees for this
    (seed, replica) pair.
    """
    if replicas < 2:
        raise ValueError("need at least two replicas")
    logz = np.empty(replicas)
    gaps = np.empty(replicas)
    shared_fwd = None
    for r in range(replicas):
        s = sample(law, N, seed, r)
        if params.beta == 0.0:
            # charge-independent weights: one table serves every replica
            if shared_fwd is None:
                shared_fwd = forward_table(kernel, s, params, N)
            fwd = shared_fwd
        else:
            fwd = forward_table(kernel, s, params, N)
        logz[r] = fwd.logZ[N]
        rng = philox_stream(seed, r, DOMAIN_PATHS)
        path = sample_path(fwd, kernel, fwd.sample, params, rng)
        gaps[r] = path.largest_gap()

    free_energy = _free_energy_from_logz(logz, N)
    _require_localized(free_energy)
    mu = _mu_from_logz(logz, N)

    ratios = gaps / math.log(N)
    median = float(np.median(ratios))
    return GapReport(ratios=tuple(float(x) for x in ratios),
                     median_ratio=median,
                     median_times_mu=median * mu.mean,
                     mu=mu, free_energy=free_energy,
                     replicas=replicas, N=N)


def critical_contact_fraction(kernel: RenewalKernel, law: DisorderLaw,
                              beta: float, h_c_estimate: float, N_grid,
                              replicas: int, seed: int) -> ContactGrowthReport:
    """Fit how the mean contact number grows with N at the transition.

    The contact number is the expected count of pinned sites in {1..N},
    summed exactly from the marginal profile of each replica, so the
    only statistical noise is over charges.  The fitted log-log slope
    is flagged against the universal 2/3 ceiling and the 2a/(1+a)
    ceiling for tail index a, both with 0.1 slack.
    """
    sizes = tuple(int(n) for n in N_grid)
    if len(sizes) < 3:
        raise ValueError("N_grid needs at least three entries")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("N_grid must be strictly increasing")
    if replicas < 2:
        raise ValueError("need at least two replicas")

    params = ModelParams(beta=beta, h=h_c_estimate)
    means, errs = [], []
    for n in sizes:
        counts = np.empty(replicas)
        shared = None
        for r in range(replicas):
            s = sample(law, n, seed, r)
            if beta == 0.0 and shared is not None:
                counts[r] = shared
                continue
            fwd = forward_table(kernel, s, params, n)
            back = backward_table(kernel, s, params, n)
            counts[r] = float(np.sum(contact_profile(fwd, back)[1:]))
            if beta == 0.0:
                shared = counts[r]
        means.append(float(np.mean(counts)))
        errs.append(float(np.std(counts, ddof=1)) / math.sqrt(replicas))

    log_n = np.log(np.array(sizes, dtype=np.float64))
    slope, intercept, r2 = _fit_line(log_n, np.log(np.array(means)))
    ceiling = 2.0 * kernel.alpha / (1.0 + kernel.alpha)
    return ContactGrowthReport(
        N_grid=sizes, mean_contacts=tuple(means),
        contacts_stderr=tuple(errs), exponent=slope, intercept=intercept,
        r_squared=r2, irrelevance_ceiling=ceiling,
        within_general_ceiling=slope <= 2.0 / 3.0 + 0.1,
        within_irrelevance_ceiling=slope <= ceiling + 0.1,
        replicas=replicas, beta=beta, h=h_c_estimate)
