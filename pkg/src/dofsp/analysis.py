"""Probability that a search costs as much as full PSI (``P_eq``).

The objective map ``f`` is drawn uniformly from ``[tau]^n`` (``n = P_1`` for
the leader-driven schemes, ``n = K`` for the ring) while the feasible sets
stay fixed with ``M`` common elements. Closed forms are evaluated exactly
with rationals; ``peq_exhaustive`` re-runs the real simulators over every
map, and ``peq_monte_carlo`` samples maps.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist

import numpy as np

from .model import Alphabet, FeasibleSet, Instance, Objective
from .ring import run_ring, ring_closed_cost
from .star import psi_download, run_star
from .two_party import d_psi, run_two_party

TOPOLOGIES = ("two_party", "ring", "star")
EXHAUSTIVE_LIMIT = 2**16


@dataclass(frozen=True)
class PeqParams:
    topology: str
    tau: int
    M: int
    P1: int | None = None
    K: int | None = None
    N: int | None = None
    Ns: tuple = field(default=())

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        if self.tau < 2:
            raise ValueError("tau must be at least 2")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.topology == "ring":
            if self.K is None or self.K < 2:
                raise ValueError("ring parameters need K >= 2")
            if self.M > self.K:
                raise ValueError("M cannot exceed K")
        else:
            if self.P1 is None or self.P1 < 1:
                raise ValueError("need P1 >= 1")
            if self.M > self.P1:
                raise ValueError("M cannot exceed P1")

    @property
    def n(self) -> int:
        """Number of elements whose objective value is random."""
        return self.K if self.topology == "ring" else self.P1

    @property
    def entities(self) -> int:
        if self.N is not None:
            return self.N
        return 2 if self.topology == "two_party" else 3

    @property
    def databases(self) -> tuple:
        return tuple(self.Ns) if self.Ns else (2,) * (self.entities - 1)


# --- closed forms ---------------------------------------------------------------


def r_max(P1: int, M: int, tau: int) -> int:
    return min(tau, P1 - M + 1)


def t_max(K: int, M: int, tau: int) -> int:
    return min(tau, K - max(2, M) + 1)


def l_max(P1: int, M: int, tau: int) -> int:
    return min(tau, P1 - max(2, M) + 1)


def peq_two_party_round(P1: int, M: int, tau: int, r: int) -> Fraction:
    if r == 1:
        return Fraction(tau, tau**P1)
    inner = sum(math.comb(j - 1, r - 2) * (tau - j) for j in range(r - 1, tau))
    return Fraction(math.comb(P1 - M, r - 1) * math.factorial(r - 1) * inner, tau**P1)


def peq_two_party_exact(P1: int, M: int, tau: int) -> Fraction:
    if not (1 <= M <= P1) or tau < 1:
        raise ValueError("need 1 <= M <= P1 and tau >= 1")
    return sum(
        (peq_two_party_round(P1, M, tau, r) for r in range(1, r_max(P1, M, tau) + 1) if M < P1 - r + 1),
        Fraction(0),
    )


def peq_ring_exact(K: int, tau: int, M: int, T_max: int | None = None) -> Fraction:
    """Tabulated ring form ``sum_r sum_{j=1..tau} C(tau - j, r - 1) / tau^K``.

    The inner sum equals ``C(tau, r)``. It counts which values occur but not
    which elements take the singleton values; ``peq_ring_enumerative`` keeps
    that factor.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    T_max = t_max(K, M, tau) if T_max is None else T_max
    total = sum(math.comb(tau - j, r - 1) for r in range(1, T_max + 1) for j in range(1, tau + 1))
    return Fraction(total, tau**K)


def peq_ring_enumerative(K: int, tau: int, M: int) -> Fraction:
    """Exact probability of ``mu = (1, ..., 1, mu_T > 1)`` with every common element in the last partition."""
    total = 0
    for T in range(1, t_max(K, M, tau) + 1):
        total += math.comb(tau, T) * math.perm(K - M, T - 1)
    return Fraction(total, tau**K)


def _compositions(total: int, parts: int, minimums):
    """All ``(a_1..a_parts)`` with ``a_i >= minimums[i]`` summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    low = minimums[0]
    rest_min = sum(minimums[1:])
    for a in range(low, total - rest_min + 1):
        for tail in _compositions(total - a, parts - 1, minimums[1:]):
            yield (a,) + tail


def _multinomial(n: int, parts) -> int:
    out = math.factorial(n)
    for p in parts:
        out //= math.factorial(p)
    return out


def star_alpha_count(P1: int, M: int, r: int) -> int:
    """Maps of the ``P1 - M`` non-common elements onto ``r`` ranked values, the worst holding all common ones."""
    mins = [1] * (r - 1) + [max(M, 2)]
    return sum(_multinomial(P1 - M, a[:-1] + (a[-1] - M,)) for a in _compositions(P1, r, mins))


def peq_star_exact(P1: int, M: int, tau: int) -> Fraction:
    """``P(R = L, alpha_L > 1)``: every common element sits in the leader's worst run of size at least two."""
    if P1 < 2:
        return Fraction(0)
    total = sum(math.comb(tau, r) * star_alpha_count(P1, M, r) for r in range(1, l_max(P1, M, tau) + 1))
    return Fraction(total, tau**P1)


def _literal_multinomial(n: int, parts) -> Fraction:
    if n < 0 or any(p < 0 for p in parts):
        return Fraction(0)
    out = Fraction(math.factorial(n))
    for p in parts:
        out /= math.factorial(p)
    return out


def peq_star_printed(P1: int, M: int, tau: int) -> Fraction:
    """The star closed form evaluated literally.

    Its outer weight is ``sum_{j=1..tau-1} C(tau - j, r - 1)`` and its
    multinomial has top ``P1 - M - r`` over parts summing to ``P1 - M``; the
    coefficient is read as ``n! / prod(parts!)`` and taken as zero when
    ``n < 0``. Kept only to report how far it is from the enumerated truth.
    """
    if P1 < 2:
        return Fraction(0)
    total = Fraction(0)
    for r in range(1, l_max(P1, M, tau) + 1):
        weight = sum(math.comb(tau - j, r - 1) for j in range(1, tau))
        mins = [1] * (r - 1) + [max(M, 2)]
        inner = sum(
            (_literal_multinomial(P1 - M - r, a[:-1] + (a[-1] - M,)) for a in _compositions(P1, r, mins)),
            Fraction(0),
        )
        total += weight * inner
    return total / tau**P1


def peq_exact(params: PeqParams) -> Fraction:
    if params.topology == "two_party":
        return peq_two_party_exact(params.P1, params.M, params.tau)
    if params.topology == "ring":
        return peq_ring_exact(params.K, params.tau, params.M)
    return peq_star_exact(params.P1, params.M, params.tau)


# --- equality events -----------------------------------------------------------


def two_party_equality_event(alpha, R: int, M_R: int) -> bool:
    P1 = sum(alpha)
    return R + alpha[R - 1] == P1 + 1 and M_R < alpha[R - 1]


def ring_equality_event(mu, R: int) -> bool:
    T = len(mu)
    return R == T and mu[-1] > 1 and all(m == 1 for m in mu[:-1])


def star_equality_event(alpha, R: int) -> bool:
    return R == len(alpha) and alpha[-1] > 1


# --- exhaustive oracle over objective maps -------------------------------------


def peq_instance(params: PeqParams, values) -> Instance:
    """Instance whose first ``M`` random elements are the common ones."""
    n = params.n
    alphabet = Alphabet.of_size(n)
    everything = FeasibleSet(n, frozenset(range(1, n + 1)))
    common = FeasibleSet(n, frozenset(range(1, params.M + 1)))
    objective = Objective(tuple(int(v) for v in values), "max", params.tau)
    N = params.entities
    if params.topology == "two_party":
        sets = (everything, common)
    else:
        sets = (everything,) * (N - 1) + (common,)
    databases = (2,) + params.databases
    return Instance(alphabet, sets, objective, databases, topology=params.topology)


def simulate_cost(params: PeqParams, values) -> tuple:
    """``(scheme cost, naive cost)`` from one real simulator run."""
    inst = peq_instance(params, values)
    if params.topology == "two_party":
        out = run_two_party(inst)
        return out.D, d_psi(params.P1, params.databases[0])
    if params.topology == "ring":
        out = run_ring(inst)
        return out.C, 2 * inst.N * inst.K
    out = run_star(inst)
    return out.D, psi_download(params.P1, params.databases)


def _ranking_key(values) -> tuple:
    """Positions grouped by value, best first; simulators see ``f`` only through this."""
    distinct = sorted(set(values), reverse=True)
    return tuple(tuple(k for k, v in enumerate(values) if v == d) for d in distinct)


def peq_exhaustive(params: PeqParams, limit: int = EXHAUSTIVE_LIMIT) -> Fraction:
    """Fraction of all ``tau^n`` objective maps on which the scheme costs as much as full PSI."""
    n = params.n
    space = params.tau**n
    if space > limit:
        raise ValueError(f"{space} objective maps exceed the limit {limit}")
    cache: dict = {}
    hits = 0
    for values in itertools.product(range(1, params.tau + 1), repeat=n):
        key = _ranking_key(values)
        if key not in cache:
            cost, naive = simulate_cost(params, values)
            if cost > naive:
                raise AssertionError(f"scheme cost {cost} exceeds naive cost {naive}")
            cache[key] = cost == naive
        hits += cache[key]
    return Fraction(hits, space)


# --- Monte Carlo ---------------------------------------------------------------


def _ceil_ratio(a, n):
    return -(-(a * n) // (n - 1))


def fast_equal(params: PeqParams, V: np.ndarray) -> np.ndarray:
    """Vectorized cost model: for each row of ``V`` (values of the random elements), is cost == naive?"""
    M = params.M
    n = params.n
    best = V[:, :M].max(axis=1)
    above = (V > best[:, None]).sum(axis=1)
    size = (V == best[:, None]).sum(axis=1)
    hits = (V[:, :M] == best[:, None]).sum(axis=1)
    present = np.zeros((V.shape[0], params.tau + 1), dtype=bool)
    rows = np.arange(V.shape[0])[:, None]
    present[rows, V] = True
    levels = np.arange(params.tau + 1)[None, :]
    R = (present & (levels >= best[:, None])).sum(axis=1)
    L = present.sum(axis=1)
    if params.topology == "two_party":
        slots = np.where(
            (R == L) & (size == 1), R - 1, np.where(hits == size, R, R + size - 1)
        )
        n2 = params.databases[0]
        return _ceil_ratio(slots, n2) == d_psi(n, n2)
    if params.topology == "star":
        skipped = (R == L) & (size == 1)
        checked = np.where(skipped, above, above + size)
        D = sum(_ceil_ratio(checked, n_i) for n_i in params.databases)
        return D == psi_download(n, params.databases)
    N = params.entities
    K = n
    total = above + size
    cost_lt = 2 * N * total + 2 * (R - above) - np.where((size == 1) | (hits == size), 2 * size, 0)
    cost_t = np.where(size > 1, 2 * N * K + 2 * (R - 1 - above), 2 * (N - 1) * (K - 1) + 2 * (R - 1))
    cost = np.where(R < L, cost_lt, cost_t)
    return cost == 2 * N * K


def cell_seed(seed: int, cell: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, cell])


def halfwidth99(p: float, trials: int) -> float:
    z = NormalDist().inv_cdf(0.995)
    return z * math.sqrt(max(p * (1 - p), 0.0) / trials)


def peq_monte_carlo(
    params: PeqParams, trials: int, seed: int = 0, simulator: str = "fast", chunk: int = 100_000
) -> tuple:
    """Estimate ``P_eq`` and its 99% normal-approximation half-width.

    ``simulator="fast"`` evaluates the vectorized cost model (checked against
    the simulators in the test-suite); ``"full"`` runs a simulator per trial.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    hits = 0
    if simulator == "full":
        for _ in range(trials):
            values = rng.integers(1, params.tau + 1, size=params.n)
            cost, naive = simulate_cost(params, values)
            hits += cost == naive
    elif simulator == "fast":
        done = 0
        while done < trials:
            size = min(chunk, trials - done)
            V = rng.integers(1, params.tau + 1, size=(size, params.n))
            hits += int(fast_equal(params, V).sum())
            done += size
    else:
        raise ValueError("simulator must be 'fast' or 'full'")
    p = hits / trials
    return p, halfwidth99(p, trials)


# --- tables --------------------------------------------------------------------

CSV_HEADER = ("topology", "K", "P1", "tau", "M", "exact", "mc_estimate", "halfwidth", "trials")


def sci(x) -> str:
    return f"{float(x):.5e}"


def peq_rows(grid, trials: int = 0, seed: int = 0) -> list:
    """One row per grid cell; MC columns are blank when ``trials == 0``."""
    rows = []
    for cell, params in enumerate(grid):
        exact = peq_exact(params)
        row = {
            "topology": params.topology,
            "K": params.K if params.K is not None else "",
            "P1": params.P1 if params.P1 is not None else "",
            "tau": params.tau,
            "M": params.M,
            "exact": sci(exact),
            "mc_estimate": "",
            "halfwidth": "",
            "trials": trials,
        }
        if trials:
            est, hw = peq_monte_carlo(params, trials, seed=cell_seed(seed, cell))
            row["mc_estimate"] = sci(est)
            row["halfwidth"] = sci(hw)
        rows.append(row)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
