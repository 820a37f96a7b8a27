"""Executable per-iteration convergence certificates.

Given a trace and a reference point ``x* = x_ref`` in the common fixed-point
set, three inequalities are evaluated per iteration (slack = RHS - LHS,
declared PASS when the minimum slack stays above ``-tolerance``):

  (i)   ||x_{n+1} - x*||  <=  sum_j |mu_{n,j}| ||x_j - x*||  +  theta_n

  (ii)  ||x_{n+1} - x*||^2  <=  sum_j mu_{n,j} ||x_j - x*||^2
          - 1/2 sum_{j,k} mu_{n,j} mu_{n,k} ||x_j - x_k||^2
          - lambda_n (1/phi_n - lambda_n) ||T_n xbar_n - xbar_n||^2 + nu_n

  (iii) ||x_{n+1} - x*||^2  <=  sum_j mu_{n,j} ||x_j - x*||^2
          - 1/2 sum_{j,k} mu_{n,j} mu_{n,k} ||x_j - x_k||^2
          + lambda_n (lambda_n - 1) ||T_n xbar_n - xbar_n||^2
          - lambda_n max_i ((1-alpha_i)/alpha_i)
                ||(Id - T_i) T_{i+} xbar_n - (Id - T_i) T_{i+} x*||^2 + nu_n

where ``theta_n = lambda_n sum_i ||e_{i,n}||``, ``nu_n = theta_n (2 ||xbar_n
- x*|| + theta_n)``, and ``T_{i+}`` is the inner tail of the stack.  These
are deterministic functions of the trace: recomputing yields identical
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import RunTrace
from .errors import (
    ConfigurationError,
    InsufficientHistoryError,
    InvalidReferenceError,
)
from .operators import apply_stack, tail_apply
from .space import Vector, as_vector

DEFAULT_CERT_TOL = 1e-9


@dataclass(frozen=True)
class CertificateReport:
    name: str
    slacks: np.ndarray
    tolerance: float
    indices: np.ndarray  # the iterations the slacks were evaluated at

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks)) if self.slacks.size else 0.0

    @property
    def first_violation(self) -> int | None:
        bad = np.nonzero(self.slacks < -self.tolerance)[0]
        return int(self.indices[bad[0]]) if bad.size else None

    @property
    def passed(self) -> bool:
        return self.first_violation is None


def verify_reference(trace: RunTrace, x_ref: Vector, tol: float = 1e-9) -> None:
    """Check that ``x_ref`` is fixed by the run's stacks (sampled iterations).

    Multi-layer stacks with a quasinonexpansive last layer assume a common
    fixed point, so each layer is checked individually there; otherwise the
    composite residual suffices.
    """
    n_steps = trace.n_steps
    sample = sorted({0, n_steps // 2, max(n_steps - 1, 0)})
    for n in sample:
        stack = trace.config.stack_at(n)
        if stack.case == "b":
            for i, layer in enumerate(stack.layers, start=1):
                if float(np.linalg.norm(layer.fn(x_ref) - x_ref)) > tol:
                    raise InvalidReferenceError(
                        f"reference is not fixed by layer {i} of the stack at n={n}"
                    )
        else:
            resid = float(np.linalg.norm(apply_stack(stack, x_ref).value - x_ref))
            if resid > tol:
                raise InvalidReferenceError(
                    f"reference has composite fixed-point residual {resid:.3e} at n={n}"
                )


def run_certificates(
    trace: RunTrace,
    x_ref,
    which: Sequence[str] = ("i", "ii"),
    tolerance: float = DEFAULT_CERT_TOL,
    check_reference: bool = True,
    indices: Sequence[int] | None = None,
) -> dict[str, CertificateReport]:
    """Evaluate the requested certificate slacks along a trace.

    The weight rows are regenerated from the run's schedule, so the trace
    must retain the orbit prefix each row touches (always true here: traces
    keep full history).  Certificate (iii) evaluates the stack tails at both
    ``xbar_n`` and ``x_ref`` every iteration; ``indices`` restricts the
    evaluation to a subsample when that cost matters.
    """
    x_ref = as_vector(x_ref, dim=trace.points[0].size)
    unknown = set(which) - {"i", "ii", "iii"}
    if unknown:
        raise ConfigurationError(f"unknown certificates {sorted(unknown)}")
    if check_reference:
        verify_reference(trace, x_ref)

    cfg = trace.config
    n_steps = trace.n_steps
    if indices is None:
        eval_at = np.arange(n_steps)
    else:
        eval_at = np.asarray(sorted(set(indices)), dtype=int)
        if eval_at.size and (eval_at[0] < 0 or eval_at[-1] >= n_steps):
            raise ConfigurationError(f"certificate indices outside 0..{n_steps - 1}")
    points = trace.points
    dists = [float(np.linalg.norm(p - x_ref)) for p in points]
    need_sq = "ii" in which or "iii" in which

    slacks = {name: np.zeros(eval_at.size) for name in which}
    for pos, n in enumerate(eval_at):
        row = cfg.weights.row(n)
        support = row.support()
        if support[-1] >= len(points):
            raise InsufficientHistoryError(f"row {n} touches missing history")
        theta_n = trace.thetas[n]
        xbar = trace.xbars[n]
        r_n = trace.residuals[n]
        if trace.residual_kinds[n] != "exact" and need_sq:
            stack = cfg.stack_at(n)
            r_n = float(np.linalg.norm(apply_stack(stack, xbar).value - xbar))
        lam = trace.lambdas[n]
        phi = trace.phis[n]
        lhs1 = dists[n + 1]

        if "i" in which:
            rhs = math.fsum(abs(w) * dists[j] for j, w in row.entries.items()) + theta_n
            slacks["i"][pos] = rhs - lhs1

        if need_sq:
            nu_n = theta_n * (2.0 * float(np.linalg.norm(xbar - x_ref)) + theta_n)
            mean_sq = math.fsum(w * dists[j] ** 2 for j, w in row.entries.items())
            spread = 0.0
            for j, wj in row.entries.items():
                for k, wk in row.entries.items():
                    if k <= j:
                        continue
                    djk = float(np.linalg.norm(points[j] - points[k]))
                    spread += wj * wk * djk * djk
            # the double sum counts each unordered pair twice; diagonal is zero
            base = mean_sq - spread - lhs1**2 + nu_n

        if "ii" in which:
            slacks["ii"][pos] = base - lam * (1.0 / phi - lam) * r_n**2

        if "iii" in which:
            stack = cfg.stack_at(n)
            layer_term = 0.0
            for i, layer in enumerate(stack.layers, start=1):
                coeff = (1.0 - layer.alpha) / layer.alpha
                if coeff == 0.0:
                    continue
                t_bar = tail_apply(stack, i, xbar)
                t_ref = tail_apply(stack, i, x_ref)
                disp = (t_bar - layer.fn(t_bar)) - (t_ref - layer.fn(t_ref))
                layer_term = max(layer_term, coeff * float(disp @ disp))
            slacks["iii"][pos] = base + lam * (lam - 1.0) * r_n**2 - lam * layer_term

    return {
        name: CertificateReport(
            name=name, slacks=slacks[name], tolerance=tolerance, indices=eval_at
        )
        for name in which
    }


# ---------------------------------------------------------------------------
# Gronwall-type envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallReport:
    envelope: np.ndarray          # envelope[n] bounds theta_{n+1}
    dominated: bool | None        # None when no sequence was supplied
    first_violation: int | None


def gronwall_envelope(
    theta0: float,
    nu_seq: Sequence[float],
    eps_seq: Sequence[float],
    theta_seq: Sequence[float] | None = None,
) -> GronwallReport:
    """Envelope for sequences obeying ``theta_{n+1} <= (1 + nu_n) theta_n + eps_n``.

    Returns, for each ``n``,

        env_n = theta0 exp(sum_{k<=n} nu_k)
                + sum_{j<n} eps_j exp(sum_{k=j+1}^{n} nu_k) + eps_n.

    When ``theta_seq`` (= theta_0, theta_1, ...) is supplied, checks
    ``theta_{n+1} <= env_n`` and reports the first violation.
    """
    if theta0 < 0.0:
        raise ConfigurationError("theta0 must be nonnegative")
    nu = np.asarray(nu_seq, dtype=np.float64)
    eps = np.asarray(eps_seq, dtype=np.float64)
    if np.any(eps < 0.0):
        raise ConfigurationError("eps sequence must be nonnegative")
    n_max = min(nu.size, eps.size)
    # prefix[k] = sum_{i<k} nu_i, so sum_{k=j+1}^{n} nu_k = prefix[n+1]-prefix[j+1]
    prefix = np.concatenate([[0.0], np.cumsum(nu[:n_max])])
    env = np.zeros(n_max)
    for n in range(n_max):
        total = theta0 * math.exp(prefix[n + 1])
        total += math.fsum(
            eps[j] * math.exp(prefix[n + 1] - prefix[j + 1]) for j in range(n)
        )
        env[n] = total + eps[n]
    dominated = None
    first_violation = None
    if theta_seq is not None:
        th = np.asarray(theta_seq, dtype=np.float64)
        if np.any(th < 0.0):
            raise ConfigurationError("theta sequence must be nonnegative")
        upto = min(n_max, th.size - 1)
        viol = np.nonzero(th[1 : upto + 1] > env[:upto] * (1 + 1e-12) + 1e-15)[0]
        dominated = viol.size == 0
        first_violation = int(viol[0]) if viol.size else None
    return GronwallReport(envelope=env, dominated=dominated, first_violation=first_violation)


# ---------------------------------------------------------------------------
# inertial parameter bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InertialBandParams:
    """Tuning constants of the inertial relaxation bands.

    ``theta_tune`` is the band's free scaling constant (distinct from the
    per-iteration error budget theta_n).
    """

    eta: float
    sigma: float
    theta_tune: float

    def __post_init__(self):
        # eta = 0 collapses to the inertia-free relaxation band and is legal
        if not 0.0 <= self.eta < 1.0:
            raise ConfigurationError("eta must lie in [0, 1)")
        if self.sigma <= 0.0 or self.theta_tune <= 0.0:
            raise ConfigurationError("sigma and theta_tune must be positive")


@dataclass(frozen=True)
class InertialBandReport:
    ok: bool
    first_violation: int | None
    violated: str | None
    lambda_margin: float          # min over n of (cap_n - lambda_n)
    sigma_margin: float           # min over n of (RHS - LHS) in the strict condition
    monotone_margin: float        # min over n of eta_{n+1} - eta_n and eta - eta_n


def inertial_band_validate(
    params: InertialBandParams,
    phi_seq: Sequence[float],
    lambda_seq: Sequence[float],
    eta_seq: Sequence[float],
) -> InertialBandReport:
    """Validate the inertial relaxation bands along given sequences.

    For every ``n`` with ``n + 1`` still in range, with
    ``omega_n = 1/phi_n - lambda_n``:

      - ``eta_n <= eta_{n+1} <= eta``;
      - ``lambda_n <= (theta/phi_n - eta B_n) / (theta (1 + B_n))`` where
        ``B_n = eta (1 + eta) + eta theta omega_{n+1} + sigma``;
      - ``(eta^2 (1 + eta) + eta sigma) / theta < 1/phi_n - eta^2 omega_{n+1}``.

    Pure validation: reports margins, never raises on violation.
    """
    phi = np.asarray(phi_seq, dtype=np.float64)
    lam = np.asarray(lambda_seq, dtype=np.float64)
    eta_n = np.asarray(eta_seq, dtype=np.float64)
    L = min(phi.size, lam.size, eta_n.size)
    if L < 2:
        raise ConfigurationError("need sequences of length >= 2")
    if np.any(phi[:L] <= 0.0) or np.any(phi[:L] > 1.0):
        raise ConfigurationError("phi values must lie in (0, 1]")
    e, sg, th = params.eta, params.sigma, params.theta_tune
    omega = 1.0 / phi[:L] - lam[:L]
    lam_margin = math.inf
    sig_margin = math.inf
    mono_margin = math.inf
    first, violated = None, None
    for n in range(L - 1):
        mono = min(eta_n[n + 1] - eta_n[n], e - eta_n[n + 1])
        b = e * (1.0 + e) + e * th * omega[n + 1] + sg
        cap = (th / phi[n] - e * b) / (th * (1.0 + b))
        strict = (1.0 / phi[n] - e * e * omega[n + 1]) - (e * e * (1.0 + e) + e * sg) / th
        lam_margin = min(lam_margin, cap - lam[n])
        sig_margin = min(sig_margin, strict)
        mono_margin = min(mono_margin, mono)
        if first is None:
            # the strict condition guarantees the cap is positive, so it is
            # checked first and named on simultaneous violations
            if mono < 0.0:
                first, violated = n, "eta monotonicity / bound"
            elif strict <= 0.0:
                first, violated = n, "strict sigma condition"
            elif not 0.0 < lam[n] <= cap:
                first, violated = n, "lambda cap"
    return InertialBandReport(
        ok=first is None,
        first_violation=first,
        violated=violated,
        lambda_margin=lam_margin,
        sigma_margin=sig_margin,
        monotone_margin=mono_margin,
    )


# ---------------------------------------------------------------------------
# summability monitor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummabilityReport:
    partial_sum: float
    tail_increment: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.tail_increment <= self.tolerance


def summability_monitor(
    values: Sequence[float],
    chi: Sequence[float] | None = None,
    tolerance: float = 1e-6,
) -> SummabilityReport:
    """Partial sums of ``chi_n a_n`` with a Cauchy-tail diagnostic.

    PASS when the increment over the last quarter of the horizon stays below
    ``tolerance``; a slowly growing partial sum (e.g. harmonic terms) shows
    up as a fat tail increment.
    """
    a = np.asarray(values, dtype=np.float64)
    if np.any(a < 0.0):
        raise ConfigurationError("summability terms must be nonnegative")
    if chi is not None:
        c = np.asarray(chi, dtype=np.float64)
        if c.size < a.size:
            raise ConfigurationError("chi weights shorter than the series")
        a = a * c[: a.size]
    sums = np.cumsum(a)
    total = float(sums[-1]) if a.size else 0.0
    cut = (3 * (a.size - 1)) // 4 if a.size else 0
    tail = total - float(sums[cut]) if a.size else 0.0
    return SummabilityReport(partial_sum=total, tail_increment=tail, tolerance=tolerance)
