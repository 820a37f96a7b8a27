"""Weight arrays, inertia sequences, summability weights, and relaxation caps.

A weight schedule generates the affine-combination rows ``mu_{n, .}`` used to
form the averaged point.  Admissible arrays satisfy four conditions:

  (a) ``sup_n sum_j |mu_{n,j}|`` finite,
  (b) every row sums to 1,
  (c) ``mu_{n,j} -> 0`` as ``n`` grows, for each fixed column ``j``,
  (e) a regularity condition quantified over all perturbed nonnegative
      sequences, witnessed by summability weights ``chi_n``.

Condition (e) is certified analytically per family, never inferred from
data: nonnegative mean-value families carry ``chi_n == 1``; the two-term
inertial family ``mu_{n,n} = 1 + eta_n``, ``mu_{n,n-1} = -eta_n`` carries

    chi_n = sum_{k >= n} exp(zeta_{k,n}),
    zeta_{k,n} = sum_{j=n+1}^{k} (eta_j - 1)   (k > n; zero otherwise),

computed here as a truncated sum plus an analytic tail bound, which makes the
reported value a safe upper estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    CertificateUnavailableError,
    ConfigurationError,
    InvalidScheduleError,
)
from .space import SparseRow, row_sum

#: default truncation horizon for chi sums
CHI_TRUNCATION = 200


# ---------------------------------------------------------------------------
# inertia sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaSchedule:
    """Extrapolation coefficients ``eta_n`` with ``eta_0 = 0`` and values in [0, 1).

    Kinds: ``zero``; ``constant`` (eta for n >= 1); ``nesterov`` with
    ``eta_n = (n - 1) / (n + tau)`` for ``n >= 1`` and ``tau >= 2``; and
    ``custom`` (a callable plus a declared supremum, asserted nondecreasing).
    """

    kind: str
    eta: float = 0.0
    tau: float = 2.0
    fn: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "nesterov", "custom"):
            raise ConfigurationError(f"unknown eta schedule kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.eta < 1.0:
            raise ConfigurationError(f"constant eta must lie in [0, 1), got {self.eta}")
        if self.kind == "nesterov" and self.tau < 2.0:
            raise ConfigurationError(f"nesterov-style schedule needs tau >= 2, got {self.tau}")
        if self.kind == "custom":
            if self.fn is None:
                raise ConfigurationError("custom eta schedule needs a callable")
            if not 0.0 <= self.eta < 1.0:
                raise ConfigurationError("custom eta schedule needs a declared sup in [0, 1)")

    def value(self, n: int) -> float:
        if n <= 0:
            return 0.0
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.eta
        if self.kind == "nesterov":
            return (n - 1.0) / (n + self.tau)
        v = float(self.fn(n))
        if not 0.0 <= v < 1.0:
            raise ConfigurationError(f"custom eta value {v} at n={n} outside [0, 1)")
        return v

    def sup(self) -> float:
        """Supremum of the sequence (1.0 for the nesterov form: its limit)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "nesterov":
            return 1.0
        return self.eta


ZERO_ETA = EtaSchedule(kind="zero")


# ---------------------------------------------------------------------------
# weight families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSchedule:
    """Generator of affine-combination rows for one of the built-in families.

    ``memoryless`` is the Kronecker row {n: 1}; ``window(w)`` averages the
    last ``w`` iterates with equal weight (head rows use all available
    indices); ``cesaro`` averages the full orbit, which has unbounded support
    and is handled by an incremental running-mean update in the engine;
    ``inertial`` is the two-term extrapolation row {n: 1+eta_n, n-1: -eta_n}.
    """

    family: str
    window: int = 1
    eta: EtaSchedule | None = None

    def __post_init__(self):
        if self.family not in ("memoryless", "window", "cesaro", "inertial"):
            raise ConfigurationError(f"unknown weight family {self.family!r}")
        if self.family == "window" and self.window < 1:
            raise ConfigurationError("window width must be >= 1")
        if self.family == "inertial" and self.eta is None:
            raise ConfigurationError("inertial weights need an eta schedule")

    def row(self, n: int) -> SparseRow:
        if n < 0:
            raise ConfigurationError("row index must be >= 0")
        if self.family == "memoryless":
            return SparseRow(n, {n: 1.0})
        if self.family == "window":
            w = min(self.window, n + 1)
            return SparseRow(n, {j: 1.0 / w for j in range(n - w + 1, n + 1)})
        if self.family == "cesaro":
            return SparseRow(n, {j: 1.0 / (n + 1) for j in range(n + 1)})
        eta_n = self.eta.value(n)
        if eta_n == 0.0:
            return SparseRow(n, {n: 1.0})
        return SparseRow(n, {n: 1.0 + eta_n, n - 1: -eta_n})

    @property
    def support_bound(self) -> int | None:
        """Largest row support size, or None for unbounded (full-orbit) support."""
        if self.family == "memoryless":
            return 1
        if self.family == "window":
            return self.window
        if self.family == "inertial":
            return 2
        return None

    @property
    def nonnegative(self) -> bool:
        if self.family == "inertial":
            return self.eta.kind == "zero"
        return True

    def eta_schedule(self) -> EtaSchedule:
        return self.eta if self.family == "inertial" and self.eta is not None else ZERO_ETA

    def mann_product_bound(self) -> float:
        """Lower bound on ``inf_n mu_{n+1,n} * mu_{n+1,n+1}`` (0 when it vanishes)."""
        if self.family == "window" and self.window >= 2:
            return 1.0 / self.window**2
        return 0.0

    def describe(self) -> str:
        if self.family == "window":
            return f"window({self.window})"
        if self.family == "inertial":
            return f"inertial({self.eta.kind})"
        return self.family


def memoryless() -> WeightSchedule:
    return WeightSchedule(family="memoryless")


def window(w: int) -> WeightSchedule:
    return WeightSchedule(family="window", window=w)


def cesaro() -> WeightSchedule:
    return WeightSchedule(family="cesaro")


def inertial(eta: EtaSchedule) -> WeightSchedule:
    return WeightSchedule(family="inertial", eta=eta)


# ---------------------------------------------------------------------------
# chi: summability weights with tail bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiEntry:
    n: int
    value: float            # truncated sum + tail bound (safe upper estimate)
    truncated_sum: float
    tail_bound: float
    truncation: int
    analytic_bound: float | None


def chi_value(schedule: WeightSchedule, n: int, truncation: int = CHI_TRUNCATION) -> ChiEntry:
    """Upper estimate of ``chi_n`` for the schedule's inertia sequence.

    Nonnegative families are treated as ``eta == 0``.  The truncated sum runs
    over ``k = n .. n+K``; the tail is bounded geometrically via
    ``sup eta < 1`` for bounded sequences, and via the cubic decay of
    ``exp(zeta)`` for the nesterov form (whose running sup tends to 1).
    """
    if truncation < 1:
        raise ConfigurationError("chi truncation must be >= 1")
    eta = schedule.eta_schedule()
    zeta = 0.0
    total = 1.0  # k == n term, exp(0)
    for k in range(n + 1, n + truncation + 1):
        zeta += eta.value(k) - 1.0
        total += math.exp(zeta)
    if eta.kind == "nesterov":
        # exp(zeta_{k,n}) decays like ((n+K+tau+1)/(k+tau+1))^(1+tau) past the cutoff
        tail = math.exp(zeta) * (n + truncation + eta.tau + 1.0) / eta.tau
        bound = (n + 7.0) / 2.0
    else:
        sup = eta.sup()
        if sup >= 1.0:
            raise CertificateUnavailableError(
                "sup eta >= 1: no usable summability certificate"
            )
        q = math.exp(sup - 1.0)
        tail = math.exp(zeta) * q / (1.0 - q)
        bound = math.e / (1.0 - sup)
    return ChiEntry(
        n=n,
        value=total + tail,
        truncated_sum=total,
        tail_bound=tail,
        truncation=truncation,
        analytic_bound=bound,
    )


def chi_table(schedule: WeightSchedule, horizon: int, truncation: int = CHI_TRUNCATION) -> list[ChiEntry]:
    return [chi_value(schedule, n, truncation) for n in range(horizon + 1)]


# ---------------------------------------------------------------------------
# weight validation
# ---------------------------------------------------------------------------

#: iteration index at which the regularity transform of 1 + 1/(n+1) is probed
TOEPLITZ_PROBE = 10_000
TOEPLITZ_TOL = 1e-3


@dataclass(frozen=True)
class WeightValidationReport:
    schedule: str
    horizon: int
    sup_abs_row_sum: float
    max_row_sum_deviation: float
    decay_status: str            # "exact-zero", "analytic", or "checked"
    max_tail_weight: float | None
    chi_certificate: str
    chi_sup: float | None
    toeplitz_index: int
    toeplitz_deviation: float
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return (
            math.isfinite(self.sup_abs_row_sum)
            and self.max_row_sum_deviation <= 1e-12
            and self.decay_status != "failed"
            and self.toeplitz_deviation <= TOEPLITZ_TOL
        )


def _sample_indexes(horizon: int, dense_limit: int = 2000) -> list[int]:
    if horizon <= dense_limit:
        return list(range(horizon + 1))
    dense = list(range(dense_limit + 1))
    sparse = np.unique(
        np.geomspace(dense_limit + 1, horizon, num=24).astype(int)
    ).tolist()
    return dense + sparse


def _toeplitz_transform(row: SparseRow) -> float:
    # transform of the probe sequence 1 + 1/(j+1), which converges to 1
    return math.fsum(w * (1.0 + 1.0 / (j + 1.0)) for j, w in row.entries.items())


def validate_weights(schedule, horizon: int) -> WeightValidationReport:
    """Check the row conditions over a horizon and report the (e) certificate.

    ``schedule`` is a WeightSchedule or an explicit sequence of rows (dicts or
    SparseRow) for ad-hoc arrays.  Row-sum violations raise
    InvalidScheduleError; everything else is reported.  The regularity
    certificate (e) comes from the family's analytic argument, never from
    data; explicit row sets get no certificate.
    """
    if horizon < 1:
        raise ConfigurationError("validation horizon must be >= 1")
    notes: list[str] = []

    if isinstance(schedule, WeightSchedule):
        name = schedule.describe()
        indexes = _sample_indexes(horizon)
        rows = {}
        for n in indexes:
            try:
                rows[n] = schedule.row(n)
            except ConfigurationError as exc:
                raise InvalidScheduleError(str(exc)) from exc
        sup_abs = max(r.abs_sum() for r in rows.values())
        max_dev = max(abs(row_sum(r.entries) - 1.0) for r in rows.values())
        if schedule.support_bound is not None:
            decay, max_tail = "exact-zero", None
            notes.append("columns vanish exactly outside the bounded support")
        else:
            decay, max_tail = "analytic", 1.0 / (horizon + 1.0)
            notes.append(
                "full-orbit family: columns decay like 1/(n+1); "
                "unbounded support - incremental averaged-point update required"
            )
        if schedule.nonnegative:
            chi_cert, chi_sup = "constant chi = 1 (nonnegative mean-value family)", 1.0
        else:
            eta = schedule.eta_schedule()
            if eta.kind != "nesterov" and eta.sup() >= 1.0:
                raise InvalidScheduleError("inertial weights need sup eta < 1 or the nesterov form")
            probe = [chi_value(schedule, n).value for n in (0, 1, 10, horizon)]
            chi_sup = max(probe)
            chi_cert = (
                "two-term extrapolation family: computed chi "
                f"(upper estimates {chi_sup:.6g} over probed indexes)"
            )
        try:
            toeplitz_row = rows.get(TOEPLITZ_PROBE) or schedule.row(TOEPLITZ_PROBE)
        except ConfigurationError as exc:  # pragma: no cover - families are total
            raise InvalidScheduleError(str(exc)) from exc
        t_idx = TOEPLITZ_PROBE
    else:
        name = "explicit rows"
        rows = {}
        for n, entries in enumerate(schedule):
            if isinstance(entries, SparseRow):
                rows[n] = entries
            else:
                try:
                    rows[n] = SparseRow(n, dict(entries))
                except ConfigurationError as exc:
                    raise InvalidScheduleError(f"row {n}: {exc}") from exc
        if not rows:
            raise InvalidScheduleError("no rows supplied")
        last = max(rows)
        sup_abs = max(r.abs_sum() for r in rows.values())
        max_dev = max(abs(row_sum(r.entries) - 1.0) for r in rows.values())
        half = last // 2
        tail = [abs(rows[last].entries.get(j, 0.0)) for j in range(half + 1)]
        max_tail = max(tail) if tail else 0.0
        decay = "checked" if max_tail < 1e-6 else "failed"
        chi_cert, chi_sup = "none (explicit rows carry no analytic certificate)", None
        notes.append("explicit rows: regularity certificate unavailable")
        toeplitz_row, t_idx = rows[last], last

    return WeightValidationReport(
        schedule=name,
        horizon=horizon,
        sup_abs_row_sum=sup_abs,
        max_row_sum_deviation=max_dev,
        decay_status=decay,
        max_tail_weight=max_tail,
        chi_certificate=chi_cert,
        chi_sup=chi_sup,
        toeplitz_index=t_idx,
        toeplitz_deviation=abs(_toeplitz_transform(toeplitz_row) - 1.0),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# relaxation schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelaxationSchedule:
    """Relaxation parameters ``lambda_n``, always capped by ``1/phi_n``.

    Policies:

    - ``constant``: a fixed requested value, rejected whenever it exceeds the
      ``1/phi_n`` cap.
    - ``fraction_of_inverse_phi``: ``(1 - eps) / phi_n``.
    - ``overrelaxed``: ``eps + (1 - eps) / phi_n``.
    - ``fb_band``: values in ``[eps, 1 + (1 - eps)(1 - gamma_n / (2 beta))]``
      for forward-backward steps (``beta = None`` means the proximal-point
      limit ``beta = +inf``); a requested value defaults to the band's upper
      end.
    """

    policy: str
    value: float | Callable[[int], float] | None = None
    epsilon: float = 0.0
    beta: float | None = None
    gamma: float | Callable[[int], float] | None = None

    def __post_init__(self):
        if self.policy not in ("constant", "fraction_of_inverse_phi", "overrelaxed", "fb_band"):
            raise ConfigurationError(f"unknown relaxation policy {self.policy!r}")
        if self.policy == "constant" and self.value is None:
            raise ConfigurationError("constant relaxation needs a value")
        if self.policy != "constant" and not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("relaxation epsilon must lie in (0, 1)")
        if self.policy == "fb_band" and self.gamma is None:
            raise ConfigurationError("fb_band relaxation needs the step sequence gamma")

    def _requested(self, n: int) -> float | None:
        if self.value is None:
            return None
        return float(self.value(n)) if callable(self.value) else float(self.value)


def constant_relaxation(lam: float) -> RelaxationSchedule:
    return RelaxationSchedule(policy="constant", value=lam)


def relaxation_at(rs: RelaxationSchedule, n: int, phi_n: float) -> float:
    """The relaxation value at iteration ``n`` for composite constant ``phi_n``.

    Raises ConfigurationError, naming the violated bound, when the requested
    value escapes the policy band or the hard ``1/phi_n`` cap.
    """
    if not 0.0 < phi_n <= 1.0:
        raise ConfigurationError(f"phi must lie in (0, 1], got {phi_n}")
    hard_cap = 1.0 / phi_n
    if rs.policy == "constant":
        lam = rs._requested(n)
    elif rs.policy == "fraction_of_inverse_phi":
        lam = (1.0 - rs.epsilon) / phi_n
    elif rs.policy == "overrelaxed":
        lam = rs.epsilon + (1.0 - rs.epsilon) / phi_n
    else:  # fb_band
        g = float(rs.gamma(n)) if callable(rs.gamma) else float(rs.gamma)
        shrink = 0.0 if rs.beta is None else g / (2.0 * rs.beta)
        cap = 1.0 + (1.0 - rs.epsilon) * (1.0 - shrink)
        alt = rs.epsilon + (1.0 - rs.epsilon) / phi_n
        if cap > alt + 1e-9:
            raise ConfigurationError(
                f"inconsistent fb band at n={n}: cap {cap} exceeds eps+(1-eps)/phi = {alt}"
            )
        lam = rs._requested(n)
        if lam is None:
            lam = cap
        if lam < rs.epsilon:
            raise ConfigurationError(
                f"lambda_{n} = {lam} below the band floor eps = {rs.epsilon}"
            )
        if lam > cap + 1e-12:
            raise ConfigurationError(
                f"lambda_{n} = {lam} exceeds the band cap 1+(1-eps)(1-gamma/(2 beta)) = {cap}"
            )
    if lam is None or lam <= 0.0:
        raise ConfigurationError(f"lambda_{n} must be positive, got {lam}")
    if lam > hard_cap + 1e-12:
        raise ConfigurationError(
            f"lambda_{n} = {lam} exceeds the relaxation cap 1/phi_n = {hard_cap}"
        )
    return lam
