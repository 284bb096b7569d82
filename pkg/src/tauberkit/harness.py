"""Consistency harness tying transforms, windows, and verdicts together.

The lemma decompositions split u(m, n) - sigma(m, n) into four terms built
from corner means and a windowed average, exactly; their residuals are the
package's strongest internal check, since the left side and the terms are
computed by completely different routes.  The proof inequalities replace
the windowed average with worst-case window drops, which is the step the
limit theorems live on.  verify_theorem runs the full pipeline for one
sequence/weight configuration and returns a verdict that is honest about
being finite-sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NonFiniteValueError, PrefixOverflowError, ScalarKindError
from .sequences import DoubleSequence, ScalarKind, WeightSequence, array_sequence, eval_grid
from .sequences import geometric, harmonic, ones, power
from .transform import sigma_single, weighted_mean_field
from .oscillation import (
    MAX_WINDOW_CELLS,
    DecisionProfile,
    LimitEstimate,
    build_bound_profile,
    build_window_profile,
    empirical_limit,
)
from .variation import VariationClass, VariationKind, classify_adaptive

_EPS = float(np.finfo(np.float64).eps)


class Theorem(Enum):
    T41 = "T41"
    T42 = "T42"
    T51 = "T51"
    T52 = "T52"


class Verdict(Enum):
    CONSISTENT_POSITIVE = "ConsistentPositive"
    CONSISTENT_NEGATIVE = "ConsistentNegative"
    VACUOUSLY_CONSISTENT = "VacuouslyConsistent"
    INCONSISTENT = "Inconsistent"


def _fsum(terms) -> float | complex:
    if any(isinstance(t, complex) for t in terms):
        return complex(
            math.fsum(t.real if isinstance(t, complex) else t for t in terms),
            math.fsum(t.imag if isinstance(t, complex) else 0.0 for t in terms),
        )
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Index choosers
# ---------------------------------------------------------------------------


def choose_mu(p: WeightSequence, m: int, delta: float) -> int:
    """Least i > m with P_i >= (1 + delta/2) * P_m."""
    if delta <= 0.0:
        raise ValueError(f"forward chooser needs delta > 0, got {delta}")
    if m < 0:
        raise ValueError(f"chooser anchor must be >= 0, got {m}")
    target = (1.0 + delta / 2.0) * p.prefix(m)
    p.ensure_sum_exceeds(target)
    sums = p.prefix_snapshot()
    idx = int(np.searchsorted(sums, target, side="left"))
    return max(idx, m + 1)


def choose_mu_backward(p: WeightSequence, m: int, delta: float) -> int:
    """Largest i with (1 + delta/2) * P_i <= P_m, as computed in doubles.

    Raises ValueError when no index qualifies (the anchor sits too close
    to the origin for this delta).
    """
    if delta <= 0.0:
        raise ValueError(f"backward chooser needs delta > 0, got {delta}")
    if m < 0:
        raise ValueError(f"chooser anchor must be >= 0, got {m}")
    factor = 1.0 + delta / 2.0
    sums = p.prefix_array(m)
    scaled = factor * sums
    idx = int(np.searchsorted(scaled, sums[m], side="right")) - 1
    if idx < 0:
        raise ValueError(
            f"{p.name}: no index i has (1 + {delta}/2) * P_i <= P_{m} = {sums[m]!r}"
        )
    return idx


# ---------------------------------------------------------------------------
# Exact decompositions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaDecomposition:
    """One split of u(m,n) - sigma(m,n) into corner-mean terms.

    residual = lhs - (term_corner + term_rows + term_cols -/+ term_window)
    with the window term subtracted on the forward split and added on the
    backward one.  rel_residual normalizes by the largest magnitude in
    sight, so 1e-15-ish means the identity held to rounding.
    """

    direction: str
    m: int
    n: int
    mu: int
    eta: int
    lhs: float | complex
    term_corner: float | complex
    term_rows: float | complex
    term_cols: float | complex
    term_window: float | complex
    residual: float | complex
    rel_residual: float

    @property
    def terms(self) -> tuple[float | complex, ...]:
        return (self.term_corner, self.term_rows, self.term_cols, self.term_window)


def _window_average(seq, p, q, i_lo, i_hi, j_lo, j_hi, anchor, flip):
    """Weighted average over [i_lo..i_hi] x [j_lo..j_hi] of u - anchor
    (anchor - u when flipped), exact accumulation."""
    pw = p.weights_array(i_hi)[i_lo:]
    qw = q.weights_array(j_hi)[j_lo:]
    block = seq.block(np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1))
    diff = (anchor - block) if flip else (block - anchor)
    terms = (pw[:, None] * qw[None, :]) * diff
    if np.iscomplexobj(terms):
        num = complex(math.fsum(terms.real.ravel().tolist()), math.fsum(terms.imag.ravel().tolist()))
    else:
        num = math.fsum(terms.ravel().tolist())
    dp = math.fsum(pw.tolist())
    dq = math.fsum(qw.tolist())
    return num / (dp * dq), dp, dq


def lemma_forward(
    seq: DoubleSequence,
    p: WeightSequence,
    q: WeightSequence,
    m: int,
    n: int,
    mu: int,
    eta: int,
) -> LemmaDecomposition:
    """Split against the forward block (m..mu] x (n..eta]; requires mu > m,
    eta > n."""
    if not (0 <= m < mu):
        raise ValueError(f"forward split needs mu > m >= 0, got m={m}, mu={mu}")
    if not (0 <= n < eta):
        raise ValueError(f"forward split needs eta > n >= 0, got n={n}, eta={eta}")
    u_mn = seq.evaluate(m, n)
    s_mn = sigma_single(seq, p, q, m, n)
    s_mu_n = sigma_single(seq, p, q, mu, n)
    s_m_eta = sigma_single(seq, p, q, m, eta)
    s_mu_eta = sigma_single(seq, p, q, mu, eta)
    t_window, dp, dq = _window_average(seq, p, q, m + 1, mu, n + 1, eta, u_mn, flip=False)
    p_mu = p.prefix(mu)
    q_eta = q.prefix(eta)
    corner = _fsum([s_mu_eta, -s_mu_n, -s_m_eta, s_mn])
    t1 = (p_mu * q_eta) / (dp * dq) * corner
    t2 = p_mu / dp * (s_mu_n - s_mn)
    t3 = q_eta / dq * (s_m_eta - s_mn)
    lhs = u_mn - s_mn
    residual = _fsum([lhs, -t1, -t2, -t3, t_window])
    scale = max(1.0, abs(lhs), abs(t1), abs(t2), abs(t3), abs(t_window))
    return LemmaDecomposition(
        direction="forward",
        m=m,
        n=n,
        mu=mu,
        eta=eta,
        lhs=lhs,
        term_corner=t1,
        term_rows=t2,
        term_cols=t3,
        term_window=t_window,
        residual=residual,
        rel_residual=abs(residual) / scale,
    )


def lemma_backward(
    seq: DoubleSequence,
    p: WeightSequence,
    q: WeightSequence,
    m: int,
    n: int,
    mu: int,
    eta: int,
) -> LemmaDecomposition:
    """Split against the backward block (mu..m] x (eta..n]; requires mu < m,
    eta < n."""
    if not (0 <= mu < m):
        raise ValueError(f"backward split needs 0 <= mu < m, got mu={mu}, m={m}")
    if not (0 <= eta < n):
        raise ValueError(f"backward split needs 0 <= eta < n, got eta={eta}, n={n}")
    u_mn = seq.evaluate(m, n)
    s_mn = sigma_single(seq, p, q, m, n)
    s_mu_n = sigma_single(seq, p, q, mu, n)
    s_m_eta = sigma_single(seq, p, q, m, eta)
    s_mu_eta = sigma_single(seq, p, q, mu, eta)
    t_window, dp, dq = _window_average(seq, p, q, mu + 1, m, eta + 1, n, u_mn, flip=True)
    p_mu = p.prefix(mu)
    q_eta = q.prefix(eta)
    corner = _fsum([s_mu_eta, -s_mu_n, -s_m_eta, s_mn])
    t1 = (p_mu * q_eta) / (dp * dq) * corner
    t2 = p_mu / dp * (s_mn - s_mu_n)
    t3 = q_eta / dq * (s_mn - s_m_eta)
    lhs = u_mn - s_mn
    residual = _fsum([lhs, -t1, -t2, -t3, -t_window])
    scale = max(1.0, abs(lhs), abs(t1), abs(t2), abs(t3), abs(t_window))
    return LemmaDecomposition(
        direction="backward",
        m=m,
        n=n,
        mu=mu,
        eta=eta,
        lhs=lhs,
        term_corner=t1,
        term_rows=t2,
        term_cols=t3,
        term_window=t_window,
        residual=residual,
        rel_residual=abs(residual) / scale,
    )


# ---------------------------------------------------------------------------
# Proof-step inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProofInequality:
    direction: str
    m: int
    n: int
    mu: int
    eta: int
    lam: float
    kappa: float
    delta: float
    gamma: float
    lhs: float
    rhs: float
    margin: float
    slack: float
    holds: bool
    window_contained: bool
    term_corner: float
    term_rows: float
    term_cols: float
    bound_rect: float
    bound_line: float


def proof_inequality_forward(
    seq: DoubleSequence,
    p: WeightSequence,
    q: WeightSequence,
    m: int,
    n: int,
    lam: float,
    kappa: float,
    delta: float,
    gamma: float,
) -> ProofInequality:
    """Bound u - sigma from above by corner-mean terms plus worst window drops.

    The windowed average of u(i,j) - u(m,n) over the forward block is at
    least (worst drop of u(i,j) below u(i,n) on the rectangle) plus (worst
    drop of u(i,n) below u(m,n) along the row window), so subtracting those
    minima instead of the average can only raise the right side.  holds
    allows a rounding slack proportional to the terms in play.

    lam and kappa are the scale pair the chooser block is meant to sit
    inside; window_contained records whether P_mu <= lam*P_m and
    Q_eta <= kappa*Q_n actually held at this anchor.
    """
    if seq.kind is not ScalarKind.REAL:
        raise ScalarKindError(f"proof inequality is order-sensitive; {seq.name} is complex")
    if lam <= 1.0 or kappa <= 1.0:
        raise ValueError(f"forward scales must exceed 1, got ({lam}, {kappa})")
    mu = choose_mu(p, m, delta)
    eta = choose_mu(q, n, gamma)
    contained = p.prefix(mu) <= lam * p.prefix(m) and q.prefix(eta) <= kappa * q.prefix(n)
    dec = lemma_forward(seq, p, q, m, n, mu, eta)
    block = seq.block(np.arange(m, mu + 1), np.arange(n, eta + 1))
    bound_rect = float((block.min(axis=1) - block[:, 0]).min())
    bound_line = float(block[:, 0].min() - block[0, 0])
    rhs = _fsum([dec.term_corner, dec.term_rows, dec.term_cols, -bound_rect, -bound_line])
    lhs = float(dec.lhs)
    scale = max(
        1.0,
        abs(lhs)
        + abs(dec.term_corner)
        + abs(dec.term_rows)
        + abs(dec.term_cols)
        + abs(bound_rect)
        + abs(bound_line),
    )
    # mean differences inside the lemma terms are amplified by ratio
    # prefactors of order 1/delta, so give the classifier more ulps than
    # the bare term sum would suggest
    slack = 1024.0 * _EPS * scale
    return ProofInequality(
        direction="forward",
        m=m,
        n=n,
        mu=mu,
        eta=eta,
        lam=lam,
        kappa=kappa,
        delta=delta,
        gamma=gamma,
        lhs=lhs,
        rhs=float(rhs),
        margin=float(rhs) - lhs,
        slack=slack,
        holds=lhs <= rhs + slack,
        window_contained=bool(contained),
        term_corner=float(dec.term_corner),
        term_rows=float(dec.term_rows),
        term_cols=float(dec.term_cols),
        bound_rect=bound_rect,
        bound_line=bound_line,
    )


def proof_inequality_backward(
    seq: DoubleSequence,
    p: WeightSequence,
    q: WeightSequence,
    m: int,
    n: int,
    lam: float,
    kappa: float,
    delta: float,
    gamma: float,
) -> ProofInequality:
    """Mirror bound from below using the backward block and window gains.

    lam and kappa are the narrowing scales in (0, 1); window_contained
    records whether every block row stayed above lam*P_m (and columns
    above kappa*Q_n).
    """
    if seq.kind is not ScalarKind.REAL:
        raise ScalarKindError(f"proof inequality is order-sensitive; {seq.name} is complex")
    if not (0.0 < lam < 1.0 and 0.0 < kappa < 1.0):
        raise ValueError(f"backward scales must lie in (0, 1), got ({lam}, {kappa})")
    mu = choose_mu_backward(p, m, delta)
    eta = choose_mu_backward(q, n, gamma)
    if mu >= m or eta >= n:
        raise ValueError(
            f"backward block is empty at (m={m}, n={n}) with delta={delta}, gamma={gamma}"
        )
    contained = p.prefix(mu) > lam * p.prefix(m) and q.prefix(eta) > kappa * q.prefix(n)
    dec = lemma_backward(seq, p, q, m, n, mu, eta)
    block = seq.block(np.arange(mu, m + 1), np.arange(eta, n + 1))
    bound_line = float(block[-1, -1] - block[:, -1].max())
    bound_rect = float((block[:, -1] - block.max(axis=1)).min())
    rhs = _fsum([dec.term_corner, dec.term_rows, dec.term_cols, bound_rect, bound_line])
    lhs = float(dec.lhs)
    scale = max(
        1.0,
        abs(lhs)
        + abs(dec.term_corner)
        + abs(dec.term_rows)
        + abs(dec.term_cols)
        + abs(bound_rect)
        + abs(bound_line),
    )
    slack = 1024.0 * _EPS * scale
    return ProofInequality(
        direction="backward",
        m=m,
        n=n,
        mu=mu,
        eta=eta,
        lam=lam,
        kappa=kappa,
        delta=delta,
        gamma=gamma,
        lhs=lhs,
        rhs=float(rhs),
        margin=lhs - float(rhs),
        slack=slack,
        holds=lhs >= rhs - slack,
        window_contained=bool(contained),
        term_corner=float(dec.term_corner),
        term_rows=float(dec.term_rows),
        term_cols=float(dec.term_cols),
        bound_rect=bound_rect,
        bound_line=bound_line,
    )


# ---------------------------------------------------------------------------
# Randomized identity suite
# ---------------------------------------------------------------------------


def lemma_residual_suite(trials: int = 100, grid: int = 20, seed: int = 0) -> list[LemmaDecomposition]:
    """Both decompositions on random grids with cycling weight families.

    Deterministic for a given (trials, grid, seed).  Residuals should sit
    at rounding level; anything else means a term is wrong.
    """
    if grid < 8:
        raise ValueError(f"suite grid must be >= 8, got {grid}")
    if trials < 1:
        raise ValueError(f"suite needs trials >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    pool = [ones, harmonic, lambda: power(1.0), lambda: geometric(1.5)]
    out = []
    for t in range(trials):
        u = rng.uniform(-1.0, 1.0, size=(grid, grid))
        seq = array_sequence(u, name=f"random_{t}")
        p = pool[t % len(pool)]()
        q = pool[(t // len(pool)) % len(pool)]()
        m = int(rng.integers(1, grid - 2))
        n = int(rng.integers(1, grid - 2))
        mu = int(rng.integers(m + 1, grid))
        eta = int(rng.integers(n + 1, grid))
        out.append(lemma_forward(seq, p, q, m, n, mu, eta))
        mu_b = int(rng.integers(0, m))
        eta_b = int(rng.integers(0, n))
        out.append(lemma_backward(seq, p, q, m, n, mu_b, eta_b))
    return out


# ---------------------------------------------------------------------------
# Full verification pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarnessConfig:
    horizon: int = 512
    lambda_ladder: tuple[float, ...] = (2.0, 1.5, 1.25, 1.1, 1.05)
    kappa_ladder: tuple[float, ...] | None = None
    tail_fraction: float = 0.5
    eps_dec: float = 0.05
    eps_agree: float | None = None
    class_horizon: int = 10**5
    class_tol: float = 0.05
    window_budget: int = MAX_WINDOW_CELLS

    def __post_init__(self):
        if self.horizon < 64:
            raise ValueError(f"harness horizon must be >= 64, got {self.horizon}")
        if not self.lambda_ladder or any(l <= 1.0 for l in self.lambda_ladder):
            raise ValueError("lambda ladder entries must all exceed 1")
        if self.kappa_ladder is not None and (
            len(self.kappa_ladder) != len(self.lambda_ladder)
            or any(k <= 1.0 for k in self.kappa_ladder)
        ):
            raise ValueError("kappa ladder must pair with lambda ladder, entries > 1")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ValueError(f"tail fraction must lie in (0, 1), got {self.tail_fraction}")
        if self.eps_dec <= 0.0:
            raise ValueError(f"eps_dec must be > 0, got {self.eps_dec}")
        if self.eps_agree is not None and self.eps_agree <= 0.0:
            raise ValueError(f"eps_agree must be > 0, got {self.eps_agree}")

    def horizon_ladder(self) -> list[int]:
        return sorted({self.horizon // 8, self.horizon // 4, self.horizon // 2, self.horizon})


_THEOREM_FUNCTIONALS = {
    Theorem.T41: ("sd_P", "sd_Q", "sd_strong_P", "sd_strong_Q"),
    Theorem.T42: ("landau",),
    Theorem.T51: ("so_P", "so_Q", "so_strong_P", "so_strong_Q"),
    Theorem.T52: ("hardy",),
}


@dataclass(frozen=True)
class TauberianReport:
    theorem: Theorem
    verdict: Verdict
    sequence: str
    weights_p: str
    weights_q: str
    weight_class_p: VariationClass
    weight_class_q: VariationClass
    class_notes: tuple[str | None, str | None]
    u_limit: LimitEstimate
    sigma_limit: LimitEstimate
    agreement_threshold: float
    limit_gap: float
    condition_profiles: dict[str, DecisionProfile] = field(repr=False)
    conditions_hold: bool = False
    hypotheses_hold: bool = False
    horizon: int = 0
    horizon_note: str | None = None


def verify_theorem(
    seq: DoubleSequence,
    p: WeightSequence,
    q: WeightSequence,
    theorem: Theorem,
    config: HarnessConfig | None = None,
) -> TauberianReport:
    """Run classification, transform, limits, and condition profiles, then
    score the configuration against one limit theorem.

    The verdict vocabulary is deliberately finite-sample: it reports
    whether what was computed is consistent with the theorem, never that
    the theorem "holds".  When the requested horizon is not computable in
    doubles (unbounded sequences, rapid weights), the grid horizon halves
    until it is, and the report says so.
    """
    cfg = config or HarnessConfig()
    if theorem in (Theorem.T41, Theorem.T42) and seq.kind is not ScalarKind.REAL:
        raise ScalarKindError(
            f"{theorem.value} uses order-sensitive conditions; {seq.name} is complex"
        )
    vc_p, used_p, note_p = classify_adaptive(p, cfg.class_horizon, cfg.class_tol)
    vc_q, used_q, note_q = classify_adaptive(q, cfg.class_horizon, cfg.class_tol)

    h = cfg.horizon
    while True:
        try:
            u_grid = eval_grid(seq, h, h)
            fieldv = weighted_mean_field(seq, p, q, h, h)
            break
        except (NonFiniteValueError, PrefixOverflowError):
            if h // 2 < 64:
                raise
            h //= 2
    horizon_note = (
        None
        if h == cfg.horizon
        else f"grid overflows doubles at horizon {cfg.horizon}; evaluated at {h}"
    )
    ladder = sorted({h // 8, h // 4, h // 2, h})
    u_limit = empirical_limit(u_grid, ladder, cfg.tail_fraction, cfg.eps_dec)
    sigma_limit = empirical_limit(fieldv.sigma, ladder, cfg.tail_fraction, cfg.eps_dec)

    profiles: dict[str, DecisionProfile] = {}
    for name in _THEOREM_FUNCTIONALS[theorem]:
        if name in ("landau", "hardy"):
            prof_p, prof_q = build_bound_profile(seq, p, q, name, ladder, cfg.tail_fraction)
            profiles[prof_p.functional] = prof_p
            profiles[prof_q.functional] = prof_q
        else:
            profiles[name] = build_window_profile(
                seq,
                p,
                q,
                name,
                ladder,
                list(cfg.lambda_ladder),
                None if cfg.kappa_ladder is None else list(cfg.kappa_ladder),
                cfg.tail_fraction,
                cfg.window_budget,
            )

    tr = {name: prof.trend_holds(cfg.eps_dec) for name, prof in profiles.items()}
    if theorem is Theorem.T41:
        conditions = tr["sd_P"] and tr["sd_Q"] and (tr["sd_strong_P"] or tr["sd_strong_Q"])
    elif theorem is Theorem.T42:
        conditions = tr["landau_p"] and tr["landau_q"]
    elif theorem is Theorem.T51:
        conditions = tr["so_P"] and tr["so_Q"] and (tr["so_strong_P"] or tr["so_strong_Q"])
    else:
        conditions = tr["hardy_p"] and tr["hardy_q"]

    weights_ok = (
        vc_p.kind is VariationKind.REGULARLY_VARYING
        and vc_q.kind is VariationKind.REGULARLY_VARYING
    )
    hypotheses = weights_ok and sigma_limit.converged and conditions
    threshold = (
        cfg.eps_agree
        if cfg.eps_agree is not None
        else 0.02 * (1.0 + abs(sigma_limit.value))
    )
    gap = abs(u_limit.value - sigma_limit.value)
    if hypotheses:
        verdict = (
            Verdict.CONSISTENT_POSITIVE
            if u_limit.converged and gap <= threshold
            else Verdict.INCONSISTENT
        )
    else:
        verdict = (
            Verdict.VACUOUSLY_CONSISTENT if u_limit.converged else Verdict.CONSISTENT_NEGATIVE
        )
    return TauberianReport(
        theorem=theorem,
        verdict=verdict,
        sequence=seq.name,
        weights_p=p.name,
        weights_q=q.name,
        weight_class_p=vc_p,
        weight_class_q=vc_q,
        class_notes=(note_p, note_q),
        u_limit=u_limit,
        sigma_limit=sigma_limit,
        agreement_threshold=float(threshold),
        limit_gap=float(gap),
        condition_profiles=profiles,
        conditions_hold=conditions,
        hypotheses_hold=hypotheses,
        horizon=h,
        horizon_note=horizon_note,
    )


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def _scalar_json(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def _limit_json(est: LimitEstimate) -> dict:
    return {
        "value": _scalar_json(est.value),
        "tail_start": est.tail_start,
        "residual_profile": [[h, r] for h, r in est.residual_profile],
        "converged": est.converged,
        "eps_dec": est.eps_dec,
    }


def _profile_json(prof: DecisionProfile) -> dict:
    return {
        "functional": prof.functional,
        "sense": prof.sense.value,
        "rungs": [
            {
                "lambda": r.lam,
                "kappa": r.kappa,
                "horizon": r.horizon,
                "stat": r.stat,
                "cells": r.cells,
            }
            for r in prof.rungs
        ],
    }


def report_json(report: TauberianReport) -> dict:
    """JSON-ready dict with a stable key order for byte-identical dumps."""
    from .variation import classification_report

    return {
        "theorem": report.theorem.value,
        "verdict": report.verdict.value,
        "sequence": report.sequence,
        "weights_p": report.weights_p,
        "weights_q": report.weights_q,
        "weight_class_p": classification_report(report.weights_p, report.weight_class_p),
        "weight_class_q": classification_report(report.weights_q, report.weight_class_q),
        "class_notes": list(report.class_notes),
        "u_limit": _limit_json(report.u_limit),
        "sigma_limit": _limit_json(report.sigma_limit),
        "agreement_threshold": report.agreement_threshold,
        "limit_gap": report.limit_gap,
        "conditions_hold": report.conditions_hold,
        "hypotheses_hold": report.hypotheses_hold,
        "horizon": report.horizon,
        "horizon_note": report.horizon_note,
        "condition_profiles": {
            name: _profile_json(prof) for name, prof in sorted(report.condition_profiles.items())
        },
    }
