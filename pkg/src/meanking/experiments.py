"""Monte Carlo harness: the mean king game, Haar ensembles and the qubit tetrahedron."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .bases import (
    BasisSet,
    SpanClassification,
    classify_rank,
    haar_random_basis_set,
    rank_of_span,
    transition_tensor,
)
from .model.bell import SIGNS, BellTriple, bell_membership
from .model.joint import all_functions, marginal_residual
from .model.lp import solve_model_lp
from .sdp import unambiguous_value
from .strategy import Strategy, StrategyError, verify_strategy

NORMALIZATION_TOL = 1e-9
CLIP_TOL = 1e-12
REPORT_COLUMNS = ["d", "k", "N", "p_s", "p_s_lo", "p_s_hi", "e_s", "e_s_stderr", "seed", "seconds"]
FIG1_COLUMNS = ["q_ab", "q_bc", "q_ca", "classical"]
QUBIT_CHUNK = 10_000


def sample_seed(seed: int, index: int) -> int:
    """Per-sample 64-bit seed, a hash of ``(seed, index)`` independent of scheduling."""
    lo, hi = np.random.SeedSequence([int(seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + level / 2)
    phat = successes / n
    denom = 1 + z**2 / n
    centre = (phat + z**2 / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z**2 / (4 * n**2)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return float(lo), float(hi)


# the game


@dataclass(frozen=True)
class GameTranscript:
    rounds: int
    failures: int
    bases: np.ndarray
    king: np.ndarray
    alice: np.ndarray
    answers: np.ndarray
    seed: int

    def summary(self) -> str:
        return f"rounds={self.rounds} failures={self.failures} seed={self.seed}"


def outcome_table(bs: BasisSet, st: Strategy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Born probabilities of the king's outcome and of Alice's outcome after it.

    Returns ``(king, alice, outcomes)`` with ``king[b, i]`` and
    ``alice[b, i, n]`` the probability of ``outcomes[n]`` given ``(b, i)``.
    """
    d, k = bs.d, bs.k
    psi = st.initial_state()
    proj = np.einsum("bia,bic->biac", bs.vectors, bs.vectors.conj())
    post = np.einsum("biac,cd->biad", proj, psi.reshape(d, d)).reshape(k * d, d * d)
    king = np.sum(np.abs(post) ** 2, axis=1).reshape(k, d)
    norms = np.sqrt(king.reshape(-1))
    live = norms > 0
    post[live] /= norms[live, None]
    outcomes, vals = st.expectations(post)
    if vals.min(initial=0.0) < -CLIP_TOL:
        raise StrategyError(f"negative outcome probability {vals.min():.3e}")
    vals = np.clip(vals, 0.0, None)
    totals = vals.sum(axis=1)
    if np.any(np.abs(totals[live] - 1.0) > NORMALIZATION_TOL):
        raise StrategyError(f"Alice's outcome distribution not normalized (max deviation {np.abs(totals[live] - 1).max():.2e})")
    vals[live] /= totals[live, None]
    return king, vals.reshape(k, d, -1), outcomes


def _draw(rng: np.random.Generator, probs: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    return np.minimum(np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right"), len(probs) - 1)


def run_game(bs: BasisSet, st: Strategy, rounds: int, seed: int, check: bool = True) -> GameTranscript:
    """Play ``rounds`` rounds: the king measures in a uniformly chosen basis, Alice answers."""
    d, k = bs.d, bs.k
    if check:
        rep = verify_strategy(bs, st)
        if not rep.ok:
            raise StrategyError(f"strategy fails verification (offdiag {rep.max_offdiag:.3e})")
    king_p, alice_p, outcomes = outcome_table(bs, st)
    rng = np.random.default_rng(seed)
    b = rng.integers(k, size=rounds)
    i = np.empty(rounds, dtype=np.int64)
    for basis in range(k):
        sel = np.flatnonzero(b == basis)
        i[sel] = _draw(rng, king_p[basis], sel.size)
    pos = np.empty(rounds, dtype=np.int64)
    for basis in range(k):
        for outcome in range(d):
            sel = np.flatnonzero((b == basis) & (i == outcome))
            if sel.size:
                pos[sel] = _draw(rng, alice_p[basis, outcome], sel.size)
    x = outcomes[pos]
    answers = all_functions(d, k)[x, b]
    return GameTranscript(
        rounds=rounds,
        failures=int(np.sum(answers != i)),
        bases=b,
        king=i,
        alice=x,
        answers=answers,
        seed=seed,
    )


def uniform_guess_strategy(d: int, k: int) -> Strategy:
    """Maximally entangled start and an outcome-independent uniform POVM."""
    n = d**k
    eye = np.eye(d * d, dtype=complex) / n
    return Strategy.from_effects(np.eye(d) / np.sqrt(d), {x: eye for x in range(n)}, d, k)


# Haar ensembles


@dataclass(frozen=True)
class SampleOutcome:
    feasible: bool
    value: float
    gap: float
    lp_residual: float
    lp_value: float
    near_degenerate: bool = False


def evaluate_sample(d: int, k: int, seed: int) -> SampleOutcome:
    """LP and SDP on one Haar basis set.

    Exact degeneracy has probability zero, so a sample that falls under the
    rank cutoff is a near-coplanar configuration; it is solved at the generic
    rank (its value is then close to 0) and flagged.
    """
    bs = haar_random_basis_set(d, k, seed)
    t = transition_tensor(bs)
    lp = solve_model_lp(t)
    resid = marginal_residual(lp.jd, t.p) if lp.feasible else 0.0
    cls = rank_of_span(bs)
    near = not cls.supports_safe_vectors
    if near:
        rank = min(d * d, k * (d - 1) + 1)
        cls = SpanClassification(rank, classify_rank(rank, d, k), d, k)
    sdp = unambiguous_value(bs, cls)
    return SampleOutcome(lp.feasible, sdp.value, sdp.gap, resid, lp.value, near)


def _evaluate_many(args):
    d, k, seeds = args
    return [evaluate_sample(d, k, s) for s in seeds]


def _map_chunks(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class ExperimentReport:
    d: int
    k: int
    N: int
    p_s: float
    p_s_lo: float
    p_s_hi: float
    e_s: float
    e_s_stderr: float
    seed: int
    seconds: float
    successes: int = 0
    max_gap: float = 0.0
    max_lp_residual: float = 0.0
    near_degenerate: int = 0

    def row(self) -> dict:
        return {c: getattr(self, c) for c in REPORT_COLUMNS}

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_table_row(d: int, N: int, seed: int, jobs: int = 1, k: int | None = None, chunk: int = 100) -> ExperimentReport:
    """Fraction of Haar basis sets with a classical model, and the mean retrodiction value."""
    k = d + 1 if k is None else k
    start = time.perf_counter()
    seeds = [sample_seed(seed, n) for n in range(N)]
    tasks = [(d, k, seeds[n : n + chunk]) for n in range(0, N, chunk)]
    results = [r for part in _map_chunks(_evaluate_many, tasks, jobs) for r in part]
    feasible = np.array([r.feasible for r in results])
    values = np.array([r.value for r in results])
    hits = int(feasible.sum())
    lo, hi = wilson_interval(hits, N)
    return ExperimentReport(
        d=d,
        k=k,
        N=N,
        p_s=hits / N,
        p_s_lo=lo,
        p_s_hi=hi,
        e_s=float(values.mean()),
        e_s_stderr=float(values.std(ddof=1) / np.sqrt(N)) if N > 1 else 0.0,
        seed=seed,
        seconds=time.perf_counter() - start,
        successes=hits,
        max_gap=float(max(r.gap for r in results)),
        max_lp_residual=float(max(r.lp_residual for r in results)),
        near_degenerate=sum(r.near_degenerate for r in results),
    )


# qubit triples


def _qubit_chunk(args) -> np.ndarray:
    """Pair values of ``size`` Haar qubit triples, shape ``(size, 3)``."""
    seed, index, size, identical = args
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    z = (rng.standard_normal((size, 3, 2, 2)) + 1j * rng.standard_normal((size, 3, 2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (diag / np.abs(diag))[..., None, :]
    first = q[..., :, 0]  # first basis vector of each basis
    if identical:
        first = np.repeat(first[:, :1], 3, axis=1)
    amp = lambda a, b: np.abs(np.sum(first[:, a].conj() * first[:, b], axis=-1)) ** 2 / 2
    return np.stack([amp(0, 1), amp(1, 2), amp(2, 0)], axis=1)


def qubit_triples(N: int, seed: int, identical: bool = False, jobs: int = 1) -> np.ndarray:
    tasks = [(seed, c, min(QUBIT_CHUNK, N - c * QUBIT_CHUNK), identical) for c in range(-(-N // QUBIT_CHUNK))]
    return np.concatenate(_map_chunks(_qubit_chunk, tasks, jobs))


def membership_flags(q: np.ndarray) -> np.ndarray:
    corr = 4.0 * np.clip(q, 0.0, 0.5) - 1.0
    return np.all(1.0 + corr @ SIGNS.T >= 0.0, axis=1)


@dataclass(frozen=True)
class QubitThirdResult:
    fraction: float
    lo: float
    hi: float
    N: int
    classical: int
    seed: int


def qubit_third(N: int, seed: int, identical: bool = False, jobs: int = 1) -> QubitThirdResult:
    """Fraction of independent Haar qubit basis triples that admit a classical model."""
    if N < 1:
        raise ValueError("N must be positive")
    flags = membership_flags(qubit_triples(N, seed, identical, jobs))
    hits = int(flags.sum())
    lo, hi = wilson_interval(hits, N)
    return QubitThirdResult(hits / N, lo, hi, N, hits, seed)


def fig1_samples(N: int, seed: int) -> list[tuple[BellTriple, bool]]:
    q = np.clip(qubit_triples(N, seed), 0.0, 0.5)
    return [(BellTriple(*row), bell_membership(BellTriple(*row))) for row in q.tolist()]


def fig1_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIG1_COLUMNS)
    for tr, flag in samples:
        w.writerow([repr(tr.q_ab), repr(tr.q_bc), repr(tr.q_ca), int(flag)])
    return buf.getvalue()


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()
