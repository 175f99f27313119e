"""Exact finite-volume computations for one disorder realization.

Everything here conditions on contacts at both 0 and N.  The forward table
holds log Z over [0, m] pinned at m, the backward table the matching
quantity for (m, N] given a contact at m, and their splice gives exact
contact marginals without ever leaving the log domain.  A plain-Python
brute-force enumerator over all 2^(N-1) contact sets serves as the
independent oracle for small N.

A single table build is O(N^2) worst case but the inner scans terminate
early once the remaining terms provably cannot matter (see _fast), which
in the localized phase cuts the work to O(N * typical gap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _fast
from .disorder import DisorderSample
from .kernels import RenewalKernel

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class ModelParams:
    """Coupling strength and pinning reward of one model point."""

    beta: float
    h: float

    def __post_init__(self):
        if self.beta < 0.0:
            raise ValueError("beta must be nonnegative")


@dataclass(eq=False)
class PartitionTable:
    """Log-partition values for every prefix (or suffix) of the volume.

    logZ[0] is exactly 0 for the forward direction; logZ[N] is exactly 0
    for the backward direction.
    """

    logZ: np.ndarray
    direction: str
    params: ModelParams
    sample: DisorderSample
    kernel: RenewalKernel

    @property
    def N(self) -> int:
        return self.logZ.size - 1

    def free_energy_density(self) -> float:
        """(1/N) log Z for the full volume (forward tables only)."""
        if self.direction != "forward":
            raise ValueError("density is defined on forward tables")
        return float(self.logZ[-1]) / self.N


@dataclass(eq=False)
class GibbsPath:
    """One contact set drawn from the finite-volume Gibbs law.

    points is strictly increasing and always starts at 0 and ends at N.
    """

    points: np.ndarray

    @property
    def N(self) -> int:
        return int(self.points[-1])

    def contact_fraction(self) -> float:
        """Fraction of sites 1..N that are contacts."""
        return (self.points.size - 1) / self.N

    def largest_gap(self) -> int:
        return int(np.max(np.diff(self.points)))

    def indicator(self) -> np.ndarray:
        """delta[k] = 1 if k is a contact, k = 0..N."""
        out = np.zeros(self.N + 1, dtype=np.float64)
        out[self.points] = 1.0
        return out


@dataclass(frozen=True)
class PathObservables:
    contact_fraction: float
    largest_gap: int


def observables(path: GibbsPath) -> PathObservables:
    return PathObservables(contact_fraction=path.contact_fraction(),
                           largest_gap=path.largest_gap())


def site_weights(sample: DisorderSample, params: ModelParams,
                 N: int) -> np.ndarray:
    """w[m] = beta * omega_m + h for sites m = 1..N; w[0] is never used."""
    if len(sample) < N:
        raise ValueError(f"sample holds {len(sample)} charges, need {N}")
    w = np.empty(N + 1)
    w[0] = 0.0
    w[1:] = params.beta * sample.values[:N] + params.h
    return w


def forward_table(kernel: RenewalKernel, sample: DisorderSample,
                  params: ModelParams, N: int | None = None) -> PartitionTable:
    """Log partition functions of all prefixes, pinned at both ends.

    logZ[m] = w[m] + logsumexp_{n<m}(logZ[n] + log K(m - n)), so gaps longer
    than the kernel support carry zero weight.
    """
    if N is None:
        N = len(sample)
    logZ = _fast.forward_logz(kernel.log_masses, kernel.sufmax_log_masses,
                              site_weights(sample, params, N), N)
    return PartitionTable(logZ=logZ, direction="forward", params=params,
                          sample=sample, kernel=kernel)


def backward_table(kernel: RenewalKernel, sample: DisorderSample,
                   params: ModelParams, N: int | None = None) -> PartitionTable:
    """Log weight of (m, N] given a contact at m, for every m."""
    if N is None:
        N = len(sample)
    logB = _fast.backward_logz(kernel.log_masses, kernel.sufmax_log_masses,
                               site_weights(sample, params, N), N)
    return PartitionTable(logZ=logB, direction="backward", params=params,
                          sample=sample, kernel=kernel)


def brute_force_log_partition(kernel: RenewalKernel, sample: DisorderSample,
                              params: ModelParams,
                              N: int | None = None) -> float:
    """Independent oracle: enumerate every contact set of {1..N-1}.

    Deliberately written in plain Python with none of the table machinery,
    so it shares no failure mode with the recursions it checks.
    """
    if N is None:
        N = len(sample)
    if N > BRUTE_FORCE_LIMIT:
        raise ValueError(f"enumeration over 2^{N - 1} subsets refused; "
                         f"N must be at most {BRUTE_FORCE_LIMIT}")
    w = [0.0] + [params.beta * float(sample.values[m - 1]) + params.h
                 for m in range(1, N + 1)]
    log_k = [float(x) for x in kernel.log_masses]

    def gap_weight(g):
        return log_k[g] if g <= kernel.n_max else -math.inf

    terms = []
    for mask in range(1 << (N - 1)):
        points = [0]
        for site in range(1, N):
            if mask >> (site - 1) & 1:
                points.append(site)
        points.append(N)
        acc = 0.0
        for a, b in zip(points, points[1:]):
            acc += gap_weight(b - a) + w[b]
        terms.append(acc)
    best = max(terms)
    if best == -math.inf:
        return -math.inf
    return best + math.log(math.fsum(math.exp(t - best) for t in terms))


def sample_path(forward: PartitionTable, kernel: RenewalKernel,
                sample: DisorderSample, params: ModelParams,
                rng: np.random.Generator) -> GibbsPath:
    """Draw one exact Gibbs contact set by backward gap sampling.

    From m = N the predecessor n < m is chosen with probability
    exp(logZ[n] + log K(m-n) + w[m] - logZ[m]); iterating down to 0 gives
    an unbiased path.  Feed rng from a dedicated stream domain (see the
    disorder module) so path draws never consume charge randomness.
    """
    if forward.direction != "forward":
        raise ValueError("need a forward table")
    N = forward.N
    if N == 0:
        return GibbsPath(points=np.zeros(1, dtype=np.int64))
    uniforms = rng.random(N)
    out = np.empty(N, dtype=np.int64)
    count = _fast.sample_path_rec(forward.logZ, kernel.log_masses,
                                  site_weights(sample, params, N),
                                  uniforms, out)
    points = np.empty(count + 1, dtype=np.int64)
    points[:count] = out[:count][::-1]
    points[count] = N
    return GibbsPath(points=points)


def _check_same_run(forward: PartitionTable, backward: PartitionTable) -> None:
    if forward.direction != "forward" or backward.direction != "backward":
        raise ValueError("need one forward and one backward table")
    if (forward.sample is not backward.sample
            or forward.params != backward.params
            or forward.kernel is not backward.kernel
            or forward.N != backward.N):
        raise ValueError("tables come from different runs")


def marginal_contact(forward: PartitionTable, backward: PartitionTable,
                     k: int) -> float:
    """Exact P(k is a contact) from the spliced tables.

    The endpoints are pinned, so k = 0 and k = N give 1 up to roundoff.
    """
    _check_same_run(forward, backward)
    if not 0 <= k <= forward.N:
        raise ValueError("site index out of range")
    p = math.exp(forward.logZ[k] + backward.logZ[k] - forward.logZ[forward.N])
    return min(p, 1.0)


def contact_profile(forward: PartitionTable,
                    backward: PartitionTable) -> np.ndarray:
    """marginal_contact for every site at once."""
    _check_same_run(forward, backward)
    with np.errstate(under="ignore"):
        p = np.exp(forward.logZ + backward.logZ - forward.logZ[forward.N])
    return np.minimum(p, 1.0)


def conditional_profile(forward: PartitionTable, backward: PartitionTable,
                        ell: int, ks: np.ndarray) -> np.ndarray:
    """C(k, ell) = P(k in tau | ell in tau) - P(k in tau) from built tables.

    Conditioning on a contact at ell factorizes the measure by the renewal
    property, so the conditional marginal is read off a forward table
    restarted at ell.  The difference is evaluated as
    P(k) * expm1(log P(k | ell) - log P(k)); the log-ratio only involves
    the two forward tables (the backward factor cancels in it exactly),
    which keeps small correlations out of the subtractive-cancellation
    regime a direct P(k|ell) - P(k) would hit.
    """
    _check_same_run(forward, backward)
    N = forward.N
    ks = np.asarray(ks, dtype=np.int64)
    if not 0 < ell < N:
        raise ValueError("conditioning site must be interior")
    if np.any(ks < ell) or np.any(ks > N):
        raise ValueError("target sites must lie in [ell, N]")
    kernel = forward.kernel
    w = site_weights(forward.sample, forward.params, N)
    w_rest = np.empty(N - ell + 1)
    w_rest[0] = 0.0
    w_rest[1:] = w[ell + 1:]
    restarted = _fast.forward_logz(kernel.log_masses,
                                   kernel.sufmax_log_masses, w_rest, N - ell)
    out = np.empty(ks.size)
    for i, k in enumerate(ks):
        uncond = marginal_contact(forward, backward, int(k))
        if k == ell:
            out[i] = 1.0 - uncond
            continue
        log_ratio = ((restarted[k - ell] - restarted[N - ell])
                     - (forward.logZ[k] - forward.logZ[N]))
        out[i] = uncond * math.expm1(log_ratio)
    return out


def two_point_profile(kernel: RenewalKernel, sample: DisorderSample,
                      params: ModelParams, ell: int, ks: np.ndarray,
                      N: int) -> np.ndarray:
    """C(k, ell) = P(k in tau | ell in tau) - P(k in tau) for many k."""
    fwd = forward_table(kernel, sample, params, N)
    back = backward_table(kernel, sample, params, N)
    return conditional_profile(fwd, back, ell, ks)


def two_point(kernel: RenewalKernel, sample: DisorderSample,
              params: ModelParams, window: tuple[int, int], N: int) -> float:
    """C(k, ell) for one pair ell <= k; place the window in the bulk."""
    ell, k = window
    if k < ell:
        raise ValueError("window must be ordered (ell, k) with ell <= k")
    return float(two_point_profile(kernel, sample, params, ell,
                                   np.array([k]), N)[0])
