"""Core iteration driver.

One step of the scheme, from the current orbit prefix ``x_0 .. x_n``:

    xbar_n  = sum_j mu_{n,j} x_j                 (affine combination)
    x_{n+1} = xbar_n + lambda_n * (T_{1,n}( ... T_{m,n} xbar_n + e_{m,n} ... )
                                   + e_{1,n} - xbar_n)

with ``lambda_n in (0, 1/phi_n]``.  The engine keeps only as much orbit as
the weight family can touch (a ring buffer of ``support_bound`` points; the
full-orbit cesaro family uses an incremental running mean instead), while the
returned trace retains the whole history for post-hoc certificate analysis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientHistoryError,
    NumericalDivergence,
)
from .operators import LayerStack, apply_stack
from .schedules import (
    RelaxationSchedule,
    WeightSchedule,
    chi_value,
    relaxation_at,
    validate_weights,
)
from .space import Vector, affine_combine, as_vector


# ---------------------------------------------------------------------------
# error models
# ---------------------------------------------------------------------------

class ErrorModel:
    """Base: no errors.  Subclasses inject per-layer perturbations.

    ``errors_for(n)`` returns whatever ``apply_stack`` accepts: ``None``, a
    per-layer list, or a callable ``(i, layer_input) -> vector | None``.
    ``budget(n, i)`` is the declared norm bound used by summability
    diagnostics (actual injected norms are recorded in the trace).
    """

    def errors_for(self, n: int):
        return None

    def budget(self, n: int, i: int) -> float:
        return 0.0


class GeometricError(ErrorModel):
    """``e_{layer, n} = rate^n * direction`` on one designated layer."""

    def __init__(self, rate: float, direction, layer: int = 1):
        if not 0.0 < rate < 1.0:
            raise ConfigurationError("geometric error rate must lie in (0, 1)")
        if layer < 1:
            raise ConfigurationError("layer index is 1-based")
        self.rate = rate
        self.direction = as_vector(direction)
        self.layer = layer

    def errors_for(self, n: int):
        def err(i, _layer_input):
            return self.rate**n * self.direction if i == self.layer else None

        return err

    def budget(self, n: int, i: int) -> float:
        if i != self.layer:
            return 0.0
        return self.rate**n * float(np.linalg.norm(self.direction))


class SequenceError(ErrorModel):
    """Per-layer error sequences given as callables ``n -> vector | None``."""

    def __init__(self, per_layer: Sequence[Callable[[int], Vector | None] | None]):
        self.per_layer = list(per_layer)

    def errors_for(self, n: int):
        out = [fn(n) if fn is not None else None for fn in self.per_layer]
        return out if any(e is not None for e in out) else None

    def budget(self, n: int, i: int) -> float:
        fn = self.per_layer[i - 1] if i - 1 < len(self.per_layer) else None
        if fn is None:
            return 0.0
        e = fn(n)
        return 0.0 if e is None else float(np.linalg.norm(e))


# ---------------------------------------------------------------------------
# orbit storage
# ---------------------------------------------------------------------------

class OrbitBuffer:
    """Ring buffer over orbit indices; capacity = deepest row support."""

    def __init__(self, capacity: int | None):
        if capacity is not None and capacity < 1:
            raise ConfigurationError("orbit capacity must be >= 1")
        self.capacity = capacity
        self._points: dict[int, Vector] = {}
        self.next_index = 0
        self.peak_retained = 0

    def append(self, x: Vector) -> None:
        self._points[self.next_index] = x
        self.next_index += 1
        if self.capacity is not None:
            evict = self.next_index - self.capacity
            if evict - 1 in self._points:
                del self._points[evict - 1]
        self.peak_retained = max(self.peak_retained, len(self._points))

    def __getitem__(self, j: int) -> Vector:
        try:
            return self._points[j]
        except KeyError:
            raise InsufficientHistoryError(
                f"orbit index {j} evicted (capacity {self.capacity})"
            ) from None


# ---------------------------------------------------------------------------
# configuration and trace
# ---------------------------------------------------------------------------

@dataclass
class IterationConfig:
    """Everything one run needs.

    ``stacks`` is a single LayerStack or a callable ``n -> LayerStack`` for
    iteration-dependent layers; stacks must keep a constant layer count and
    dimension.  ``synthetic_errors`` selects how the residual is measured
    when errors are injected: synthetic errors trigger an extra clean
    composite evaluation (the residual stays exact); genuine inexactness
    falls back to the perturbed value and the trace labels it approximate.
    ``stop_residual = 0`` disables the residual stop entirely (useful when a
    mean point can land on a fixed point without the orbit having settled).
    """

    stacks: LayerStack | Callable[[int], LayerStack]
    weights: WeightSchedule
    relaxation: RelaxationSchedule
    x0: Vector
    errors: ErrorModel = field(default_factory=ErrorModel)
    max_iters: int = 1000
    stop_residual: float = 1e-10
    reference: Vector | None = None
    synthetic_errors: bool = True
    aux_recorder: Callable[[int, Vector], dict] | None = None
    validate_horizon: int | None = None

    def stack_at(self, n: int) -> LayerStack:
        return self.stacks(n) if callable(self.stacks) else self.stacks


@dataclass
class RunTrace:
    """Per-iteration record of a run, plus the config that produced it.

    ``points`` holds ``x_0 .. x_N`` (one more entry than there are steps);
    all step-indexed lists have length ``n_steps``.
    """

    config: IterationConfig
    points: list[Vector] = field(default_factory=list)
    xbars: list[Vector] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    phis: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    residual_kinds: list[str] = field(default_factory=list)
    thetas: list[float] = field(default_factory=list)
    error_norms: list[tuple[float, ...]] = field(default_factory=list)
    dist_to_ref: list[float] | None = None
    aux: list[dict] | None = None
    stop_reason: str = ""
    flags: list[str] = field(default_factory=list)
    peak_orbit_points: int = 0

    @property
    def n_steps(self) -> int:
        return len(self.residuals)

    @property
    def final_point(self) -> Vector:
        return self.points[-1]

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    def final_dist_to_ref(self) -> float | None:
        if self.config.reference is None:
            return None
        return float(np.linalg.norm(self.final_point - self.config.reference))

    def step_differences(self) -> np.ndarray:
        """Norms ``||x_{n+1} - x_n||`` for n = 0 .. n_steps-1."""
        return np.array(
            [float(np.linalg.norm(self.points[k + 1] - self.points[k]))
             for k in range(self.n_steps)]
        )


def _prevalidate(config: IterationConfig) -> None:
    horizon = config.validate_horizon
    if horizon is None:
        horizon = min(config.max_iters, 1000)
    validate_weights(config.weights, max(horizon, 1))
    # probe the relaxation band over the whole run before touching operators
    if callable(config.stacks):
        m0 = config.stacks(0).m
        for n in range(config.max_iters):
            stack = config.stacks(n)
            if stack.m != m0:
                raise ConfigurationError(
                    f"stack provider changed layer count at n={n} ({stack.m} != {m0})"
                )
            relaxation_at(config.relaxation, n, stack.phi)
    else:
        phi = config.stacks.phi
        for n in range(config.max_iters):
            relaxation_at(config.relaxation, n, phi)


def run(config: IterationConfig) -> RunTrace:
    """Iterate until the clean residual drops below ``stop_residual`` or
    ``max_iters`` is reached; returns the full trace.

    With memoryless weights the produced iterates coincide bit-for-bit with
    the plain recursion ``x <- x + lambda (T_1(...T_m x + e_m ...) + e_1 - x)``
    (same floating-point operation order).
    """
    _prevalidate(config)
    x0 = as_vector(config.x0)
    weights = config.weights
    cesaro_mode = weights.support_bound is None
    orbit = OrbitBuffer(weights.support_bound)
    orbit.append(x0)
    running_sum = x0.copy() if cesaro_mode else None

    trace = RunTrace(config=config)
    trace.points.append(x0)
    if config.reference is not None:
        config.reference = as_vector(config.reference, dim=x0.size)
        trace.dist_to_ref = []
    if config.aux_recorder is not None:
        trace.aux = []

    stop_reason = "max_iters"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for n in range(config.max_iters):
            if cesaro_mode:
                xbar = running_sum / (n + 1.0)
            else:
                xbar = affine_combine(weights.row(n), orbit)
            stack = config.stack_at(n)
            lam = relaxation_at(config.relaxation, n, stack.phi)

            errors_n = config.errors.errors_for(n)
            noisy = apply_stack(stack, xbar, errors_n)
            if errors_n is None:
                residual = float(np.linalg.norm(noisy.value - xbar))
                residual_kind = "exact"
            elif config.synthetic_errors:
                clean = apply_stack(stack, xbar).value
                residual = float(np.linalg.norm(clean - xbar))
                residual_kind = "exact"
            else:
                residual = float(np.linalg.norm(noisy.value - xbar))
                residual_kind = "approximate"

            x_next = xbar + lam * (noisy.value - xbar)
            if not np.all(np.isfinite(x_next)):
                raise NumericalDivergence(
                    f"iterate became non-finite at iteration {n}", iteration=n
                )

            trace.xbars.append(xbar)
            trace.lambdas.append(lam)
            trace.phis.append(stack.phi)
            trace.residuals.append(residual)
            trace.residual_kinds.append(residual_kind)
            trace.error_norms.append(noisy.error_norms)
            trace.thetas.append(lam * noisy.aggregate_error)
            if trace.dist_to_ref is not None:
                trace.dist_to_ref.append(
                    float(np.linalg.norm(trace.points[n] - config.reference))
                )
            if config.aux_recorder is not None:
                trace.aux.append(config.aux_recorder(n, xbar))

            trace.points.append(x_next)
            orbit.append(x_next)
            if cesaro_mode:
                running_sum = running_sum + x_next

            if config.stop_residual > 0.0 and residual <= config.stop_residual:
                stop_reason = "residual"
                break

    trace.flags = [str(w.message) for w in caught]
    trace.stop_reason = stop_reason
    trace.peak_orbit_points = orbit.peak_retained
    return trace


def step(orbit_points: Sequence[Vector], n: int, stack: LayerStack,
         weights: WeightSchedule, lam: float, errors=None) -> tuple[Vector, Vector]:
    """One update from the orbit prefix ``x_0 .. x_n``; returns (xbar_n, x_{n+1}).

    Convenience for tests and small experiments; ``run`` is the real driver.
    """
    if len(orbit_points) != n + 1:
        raise ConfigurationError(f"orbit prefix must hold x_0..x_{n}")
    relaxation_at(RelaxationSchedule(policy="constant", value=lam), n, stack.phi)
    xbar = affine_combine(weights.row(n), list(orbit_points))
    out = apply_stack(stack, xbar, errors)
    x_next = xbar + lam * (out.value - xbar)
    if not np.all(np.isfinite(x_next)):
        raise NumericalDivergence(f"iterate became non-finite at iteration {n}", iteration=n)
    return xbar, x_next


# ---------------------------------------------------------------------------
# error budget diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorBudgetReport:
    partial_sums: np.ndarray     # S_N = sum_{n<=N} chi_n lambda_n sum_i ||e_{i,n}||
    tail_increment: float        # S_N - S_{3N/4}
    flags: tuple[str, ...]

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1]) if len(self.partial_sums) else 0.0


def error_budget_check(config: IterationConfig, horizon: int) -> ErrorBudgetReport:
    """Partial sums of the chi-weighted error budget over a horizon.

    Uses declared budgets, not actual injected vectors, so it runs without
    iterating.  Flags inertial weights carrying errors outside the supported
    regime (unit relaxation and a bounded-range outermost layer).
    """
    if horizon < 1:
        raise ConfigurationError("budget horizon must be >= 1")
    weights = config.weights
    nonneg = weights.nonnegative
    flags: list[str] = []
    m = config.stack_at(0).m
    sums = np.zeros(horizon + 1)
    acc = 0.0
    any_error = False
    all_unit_lambda = True
    for n in range(horizon + 1):
        stack = config.stack_at(n)
        lam = relaxation_at(config.relaxation, n, stack.phi)
        if lam != 1.0:
            all_unit_lambda = False
        chi_n = 1.0 if nonneg else chi_value(weights, n).value
        per_iter = sum(config.errors.budget(n, i) for i in range(1, m + 1))
        if per_iter > 0.0:
            any_error = True
        acc += chi_n * lam * per_iter
        sums[n] = acc
    if any_error and not nonneg:
        first_layer_bounded = config.stack_at(0).layers[0].bounded_range
        if not (all_unit_lambda and first_layer_bounded):
            flags.append(
                "unsupported-regime: errors under inertial weights are only "
                "covered with unit relaxation and a bounded-range outer layer"
            )
    tail = acc - float(sums[(3 * horizon) // 4])
    return ErrorBudgetReport(partial_sums=sums, tail_increment=tail, flags=tuple(flags))
