"""Gap laws for renewal pinning models and their asymptotic diagnostics.

A kernel is a probability law K on {1, ..., n_max} for the gap between
consecutive renewal contacts.  Construction always happens in the log
domain; linear masses are derived and kept alongside for bulk arithmetic.

Families whose natural support is infinite are truncated at n_max.  The
stored masses are renormalized to sum to one, and ``log_sigma`` records the
log of the truncated fraction, so that

    masses * exp(log_sigma)  ==  the exact first n_max masses
                                 of the untruncated normalized law.

That sub-probability prefix is what the renewal-mass recursion consumes:
u(n) for n <= n_max only ever involves gaps of length <= n, hence is exact
for the infinite law, free of any truncation inflation.  Working with the
renormalized kernel at pinning strength h instead reproduces the raw model
at h + log_sigma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln, zeta

from ._fast import renewal_mass_rec

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class SlowlyVarying:
    """Slowly varying factor L(x), either a constant or scale*log(1+x)^gamma."""

    kind: str            # "const" or "logpow"
    scale: float
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("const", "logpow"):
            raise ValueError(f"unknown slowly varying kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def constant(cls, c: float = 1.0) -> "SlowlyVarying":
        return cls("const", c)

    @classmethod
    def log_power(cls, gamma: float, scale: float = 1.0) -> "SlowlyVarying":
        return cls("logpow", scale, gamma)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "const":
            return np.full_like(x, self.scale)
        return self.scale * np.log1p(x) ** self.gamma

    def rescaled(self, factor: float) -> "SlowlyVarying":
        return SlowlyVarying(self.kind, self.scale * factor, self.gamma)

    def describe(self) -> str:
        if self.kind == "const":
            return f"const:{self.scale:.17g}"
        return f"logpow:{self.scale:.17g}:gamma={self.gamma:.17g}"


@dataclass(eq=False)
class RenewalKernel:
    """Normalized gap law on 1..n_max with tail metadata.

    masses and log_masses describe the same law; the log array is the
    authoritative one (linear masses may underflow to 0 deep in the tail,
    which is harmless because all recursions work on logs).  alpha is the
    tail exponent of K(n) ~ L(n) / n^(1+alpha); it is +inf for laws with
    exponential tails and nan when no tail model applies.
    """

    family: str
    alpha: float
    n_max: int
    log_masses: np.ndarray       # index 0 unused, -inf
    log_sigma: float
    slowly_varying: SlowlyVarying | None = None
    # Log masses of the untruncated law's prefix, kept verbatim so that the
    # renewal recursion sees exact values rather than a renormalization
    # round trip.  Defaults to log_masses + log_sigma.
    log_masses_raw: np.ndarray | None = None
    masses: np.ndarray = field(init=False)
    sufmax_log_masses: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.log_masses.shape != (self.n_max + 1,):
            raise ValueError("log_masses must have length n_max + 1")
        if self.log_sigma > NORMALIZATION_TOL:
            raise ValueError(f"log_sigma must be <= 0, got {self.log_sigma}")
        self.masses = np.exp(self.log_masses)
        self.masses[0] = 0.0
        total = math.fsum(self.masses.tolist())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"kernel masses sum to {total!r}, not 1")
        if self.log_masses_raw is None:
            self.log_masses_raw = self.log_masses + self.log_sigma
            self.log_masses_raw[0] = -np.inf
        # Suffix maximum of log K, used by the transfer recursions to prove
        # that the remainder of a scan is negligible.
        suf = self.log_masses.copy()
        for g in range(self.n_max - 1, 0, -1):
            suf[g] = max(suf[g], suf[g + 1])
        self.sufmax_log_masses = suf

    @property
    def mean_gap(self) -> float:
        n = np.arange(self.n_max + 1, dtype=np.float64)
        return float(math.fsum((n * self.masses).tolist()))

    def raw_masses(self) -> np.ndarray:
        """Exact sub-probability prefix of the untruncated law (index 0 = 0)."""
        raw = np.exp(self.log_masses_raw)
        raw[0] = 0.0
        return raw

    def describe(self) -> dict[str, str]:
        out = {
            "kernel.family": self.family,
            "kernel.alpha": f"{self.alpha:.17g}",
            "kernel.n_max": str(self.n_max),
            "kernel.log_sigma": f"{self.log_sigma:.17g}",
        }
        if self.slowly_varying is not None:
            out["kernel.L"] = self.slowly_varying.describe()
        return out


def _finish_kernel(family: str, alpha: float, n_max: int,
                   log_raw: np.ndarray, tail_mass: float,
                   slowly_varying: SlowlyVarying | None,
                   already_normalized: bool = False) -> RenewalKernel:
    """Normalize raw masses and record the truncated fraction.

    log_raw holds the untruncated law's log masses on 1..n_max and tail_mass
    its total mass beyond n_max.  With already_normalized=True the infinite
    law is a probability by construction (total mass exactly 1), so log_raw
    is stored verbatim as the raw prefix and log_sigma = log(1 - tail);
    otherwise the infinite total is estimated as s_trunc + tail_mass.
    """
    raw = np.exp(log_raw)
    raw[0] = 0.0
    s_trunc = math.fsum(raw.tolist())
    if s_trunc <= 0:
        raise ValueError("kernel has no mass on its support")
    log_masses = log_raw - math.log(s_trunc)
    log_masses[0] = -np.inf
    if already_normalized:
        log_raw_norm = log_raw.copy()
        log_sigma = math.log1p(-tail_mass)
    else:
        s_inf = s_trunc + tail_mass
        log_raw_norm = log_raw - math.log(s_inf)
        log_sigma = -math.log1p(tail_mass / s_trunc)
    log_raw_norm[0] = -np.inf
    sv = slowly_varying.rescaled(1.0 / s_trunc) if slowly_varying else None
    return RenewalKernel(family=family, alpha=alpha, n_max=n_max,
                         log_masses=log_masses, log_sigma=min(log_sigma, 0.0),
                         slowly_varying=sv, log_masses_raw=log_raw_norm)


def power_law_kernel(alpha: float, n_max: int,
                     slowly_varying: SlowlyVarying | None = None) -> RenewalKernel:
    """K(n) proportional to L(n) / n^(1+alpha), normalized over all n >= 1.

    alpha = 0 is allowed only when L decays fast enough for the total mass
    to converge (log-power with gamma < -1); otherwise the partial sum is
    reported in the error.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    sv = slowly_varying or SlowlyVarying.constant(1.0)
    n = np.arange(n_max + 1, dtype=np.float64)
    log_raw = np.empty(n_max + 1)
    log_raw[0] = -np.inf
    with np.errstate(divide="ignore"):
        log_l = np.log(sv(n[1:]))
    log_raw[1:] = log_l - (1.0 + alpha) * np.log(n[1:])
    partial = math.fsum(np.exp(log_raw[1:]).tolist())
    convergent = alpha > 0 or (sv.kind == "logpow" and sv.gamma < -1)
    if not convergent:
        raise ValueError(
            "total mass of the raw family diverges; partial sum at "
            f"n_max={n_max} is already {partial!r}")
    tail = _power_tail(alpha, sv, n_max)
    kern = _finish_kernel("power", alpha, n_max, log_raw, tail, sv)
    return kern


def _power_tail(alpha: float, sv: SlowlyVarying, n_max: int) -> float:
    """Mass of L(n)/n^(1+alpha) beyond n_max."""
    if sv.kind == "const":
        return sv.scale * float(zeta(1.0 + alpha, n_max + 1))
    # Midpoint-corrected integral under u = log x; the substitution turns
    # the slowly varying factor into a power of u so quad converges without
    # complaint.  Relative error O(n_max^-2), which only touches log_sigma,
    # never the stored masses.
    def f(u):
        # log1p(e^u) computed stably for large u
        lu = u + math.log1p(math.exp(-u))
        return sv.scale * lu ** sv.gamma * math.exp(-alpha * u)

    val, _ = integrate.quad(f, math.log(n_max + 0.5), np.inf, limit=200)
    return val


def geometric_kernel(rate: float, n_max: int) -> RenewalKernel:
    """K(n) = e^(-rate*n) * (e^rate - 1): exponential gaps, mean e^rate/(e^rate-1).

    rate = log 2 gives K(n) = 2^-n with mean gap 2.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    n = np.arange(n_max + 1, dtype=np.float64)
    log_raw = -rate * n + math.log(math.expm1(rate))
    log_raw[0] = -np.inf
    tail = math.exp(-rate * n_max)  # geometric series beyond n_max
    return _finish_kernel("geometric", math.inf, n_max, log_raw, tail, None,
                          already_normalized=True)


def _log_srw_return(n: np.ndarray) -> np.ndarray:
    """log of binom(2n, n) / ((2n - 1) 4^n), the simple-walk first-return law."""
    return (gammaln(2 * n + 1) - 2 * gammaln(n + 1)
            - np.log(2 * n - 1) - n * np.log(4.0))


def srw_return_kernel(n_max: int) -> RenewalKernel:
    """First return to the origin of the simple random walk, in renewal units.

    One renewal unit is two walk steps; K(1) = 1/2, K(2) = 1/8, K(3) = 1/16,
    with tail exponent alpha = 1/2 and L -> 1/(2 sqrt(pi)).
    """
    n = np.arange(n_max + 1, dtype=np.float64)
    log_raw = np.empty(n_max + 1)
    log_raw[0] = -np.inf
    log_raw[1:] = _log_srw_return(n[1:])
    # P(no return within n units) equals the walk's return probability at
    # time 2n: binom(2n, n) 4^-n.
    m = float(n_max)
    tail = math.exp(gammaln(2 * m + 1) - 2 * gammaln(m + 1) - m * math.log(4.0))
    sv = SlowlyVarying.constant(1.0 / (2.0 * math.sqrt(math.pi)))
    return _finish_kernel("srw", 0.5, n_max, log_raw, tail, sv,
                          already_normalized=True)


def poland_scheraga_kernel(n_max: int, alpha: float = 2.12,
                           sigma: float = 1e-5) -> RenewalKernel:
    """Loop-entropy law with a small cooperativity weight sigma.

    K(n) = sigma / n^(1+alpha) for n >= 2; K(1) absorbs the remaining mass,
    so the law is normalized on the infinite support by construction.
    """
    if not 0 < sigma:
        raise ValueError("sigma must be positive")
    loop_mass = sigma * float(zeta(1.0 + alpha) - 1.0)
    k1 = 1.0 - loop_mass
    if k1 <= 0:
        raise ValueError(f"sigma={sigma} leaves no mass for K(1)")
    n = np.arange(n_max + 1, dtype=np.float64)
    log_raw = np.empty(n_max + 1)
    log_raw[0] = -np.inf
    log_raw[1] = math.log(k1)
    if n_max >= 2:
        log_raw[2:] = math.log(sigma) - (1.0 + alpha) * np.log(n[2:])
    tail = sigma * float(zeta(1.0 + alpha, n_max + 1))
    sv = SlowlyVarying.constant(sigma)
    return _finish_kernel("ps", alpha, n_max, log_raw, tail, sv,
                          already_normalized=True)


def renormalize_subprobability(raw: Sequence[float] | np.ndarray) -> RenewalKernel:
    """Turn user-supplied sub-probability masses on 1..len(raw) into a kernel.

    The total mass must not exceed 1; its log is stored as log_sigma, so
    log_sigma = 0 exactly when the input already summed to one.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("raw masses must be a non-empty 1-d sequence")
    if np.any(arr < 0):
        raise ValueError("raw masses must be non-negative")
    total = math.fsum(arr.tolist())
    if total > 1.0 + NORMALIZATION_TOL:
        raise ValueError(f"raw masses sum to {total!r} > 1")
    if total <= 0:
        raise ValueError("raw masses must carry positive total mass")
    n_max = arr.size
    log_masses = np.empty(n_max + 1)
    log_masses[0] = -np.inf
    with np.errstate(divide="ignore"):
        log_masses[1:] = np.log(arr) - math.log(total)
    log_sigma = 0.0 if total == 1.0 else math.log(total)
    return RenewalKernel(family="custom", alpha=math.nan, n_max=n_max,
                         log_masses=log_masses,
                         log_sigma=min(log_sigma, 0.0), slowly_varying=None)


def build_kernel(family: str, n_max: int, *, alpha: float | None = None,
                 rate: float | None = None, sigma: float | None = None,
                 slowly_varying: SlowlyVarying | None = None) -> RenewalKernel:
    """Dispatch helper used by the command line."""
    if family == "power":
        if alpha is None:
            raise ValueError("power family needs alpha")
        return power_law_kernel(alpha, n_max, slowly_varying)
    if family == "geometric":
        if rate is None:
            raise ValueError("geometric family needs rate")
        return geometric_kernel(rate, n_max)
    if family == "srw":
        return srw_return_kernel(n_max)
    if family == "ps":
        kwargs = {}
        if alpha is not None:
            kwargs["alpha"] = alpha
        if sigma is not None:
            kwargs["sigma"] = sigma
        return poland_scheraga_kernel(n_max, **kwargs)
    raise ValueError(f"unknown kernel family {family!r}")


@dataclass(eq=False)
class RenewalMassTable:
    """u(n) = P(n is a renewal point) for the kernel's untruncated law.

    Exact for n <= n_max because no gap longer than n can contribute to
    u(n).  u(0) = 1 and 0 <= u(n) <= 1 throughout.
    """

    kernel: RenewalKernel
    N: int
    u: np.ndarray

    def doney_ratios(self, n_lo: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """u(n) * L(n) * n^(1-alpha) * pi / (alpha sin(pi alpha)) on [n_lo, N].

        Converges to 1 for power-tailed kernels with alpha in (0, 1).  L here
        is the slowly varying factor of the raw (untruncated) law, i.e. the
        stored metadata rescaled by exp(log_sigma).
        """
        kern = self.kernel
        if kern.slowly_varying is None or not 0 < kern.alpha < 1:
            raise ValueError("tail diagnostic needs a power kernel with "
                             "alpha in (0, 1)")
        if n_lo is None:
            n_lo = max(1, self.N // 10)
        ns = np.arange(n_lo, self.N + 1, dtype=np.int64)
        x = ns.astype(np.float64)
        l_raw = kern.slowly_varying(x) * math.exp(kern.log_sigma)
        const = math.pi / (kern.alpha * math.sin(math.pi * kern.alpha))
        ratios = self.u[ns] * l_raw * x ** (1.0 - kern.alpha) * const
        return ns, ratios


def renewal_mass(kernel: RenewalKernel, N: int) -> RenewalMassTable:
    """Run the renewal recursion u(m) = sum_j K(j) u(m-j) up to m = N.

    Uses the kernel's exact sub-probability prefix (see module docstring),
    so the table matches the infinite-support law wherever it is defined.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    raw = kernel.raw_masses()
    u = renewal_mass_rec(raw, N)
    if np.any(u < 0) or np.any(u > 1.0 + 1e-12):
        raise AssertionError("renewal masses left [0, 1]")
    return RenewalMassTable(kernel=kernel, N=N, u=u)


@dataclass(frozen=True)
class TauberianReport:
    """Partial-sum and Laplace-transform ratios against their limits."""

    gamma: float
    rows: tuple[tuple[int, float, float], ...]  # (N, partial_ratio, laplace_ratio)
    label: str

    def max_deviation(self) -> float:
        return max(max(abs(p - 1.0), abs(q - 1.0)) for _, p, q in self.rows)


def check_tauberian(source, gamma: float | None = None,
                    N_grid: Sequence[int] = (10_000, 100_000),
                    chunk: int = 1 << 22) -> TauberianReport:
    """Check the two slowly-varying summation laws on a concrete sequence.

    source is a RenewalKernel (the sequence n * K(n) is used, gamma =
    -alpha), a 1-d array a(1..len), or a vectorized callable a(n).  With
    a(n) = n^gamma l(n) and l estimated locally as a(N) N^-gamma the report
    holds, for each N in the grid,

        partial ratio:  sum_{n<=N} a(n)   over  N^(gamma+1) l(N) / (gamma+1)
        laplace ratio:  sum_n a(n)e^(-n/N)  over  Gamma(1+gamma) N^(gamma+1) l(N)

    both of which tend to 1.  The Laplace sum is cut at 45 N, where the
    discarded terms are below 1e-12 of the total.
    """
    if isinstance(source, RenewalKernel):
        if not np.isfinite(source.alpha):
            raise ValueError("kernel tail diagnostic needs finite alpha")
        gamma = -source.alpha
        masses = source.masses

        def seq(n):
            n = np.asarray(n)
            out = np.zeros(n.shape, dtype=np.float64)
            ok = n <= source.n_max
            out[ok] = n[ok] * masses[n[ok]]
            return out
        label = f"kernel:{source.family}"
    elif callable(source):
        if gamma is None:
            raise ValueError("gamma is required for a callable source")
        seq = lambda n: np.asarray(source(n), dtype=np.float64)
        label = "callable"
    else:
        arr = np.asarray(source, dtype=np.float64)
        if gamma is None:
            raise ValueError("gamma is required for an array source")

        def seq(n):
            n = np.asarray(n)
            out = np.zeros(n.shape, dtype=np.float64)
            ok = n <= arr.size
            out[ok] = arr[n[ok] - 1]
            return out
        label = "array"
    if gamma <= -1:
        raise ValueError("gamma must exceed -1")

    rows = []
    for N in sorted(int(N) for N in N_grid):
        a_N = float(seq(np.array([N]))[0])
        if a_N <= 0:
            raise ValueError(f"sequence vanishes at N={N}")
        ell = a_N * float(N) ** (-gamma)
        partial = 0.0
        laplace = 0.0
        cut = 45 * N
        for start in range(1, cut + 1, chunk):
            n = np.arange(start, min(start + chunk, cut + 1), dtype=np.int64)
            a = seq(n)
            if start <= N:
                inside = n <= N
                partial += float(np.sum(a[inside]))
            laplace += float(np.sum(a * np.exp(-n / float(N))))
        p_lim = float(N) ** (gamma + 1.0) * ell / (gamma + 1.0)
        l_lim = math.gamma(1.0 + gamma) * float(N) ** (gamma + 1.0) * ell
        rows.append((N, partial / p_lim, laplace / l_lim))
    return TauberianReport(gamma=float(gamma), rows=tuple(rows), label=label)
