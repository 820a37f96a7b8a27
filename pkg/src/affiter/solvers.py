"""Solver presets: named iteration configs with solution extractors.

Each builder validates its parameter bands eagerly, wires the layer stack,
weights, relaxation, and error model into an IterationConfig, and attaches
the rule that maps a finished trace to the reported solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certificates import InertialBandParams, inertial_band_validate
from .engine import ErrorModel, IterationConfig, RunTrace, SequenceError, run
from .errors import ConfigurationError
from .operators import (
    AveragedOperator,
    LayerStack,
    MonotoneMap,
    compose,
    relaxed,
    resolvent_operator,
    subgradient_projector,
)
from .schedules import (
    EtaSchedule,
    RelaxationSchedule,
    WeightSchedule,
    inertial,
    memoryless,
    validate_weights,
)
from .space import Vector, as_vector


@dataclass
class SolverPreset:
    name: str
    config: IterationConfig
    extract: Callable[[RunTrace], Vector]
    notes: str = ""
    demiclosed: bool = True

    def solve(self) -> tuple[Vector, RunTrace]:
        trace = run(self.config)
        return self.extract(trace), trace


def _seq(errors) -> Callable[[int], Vector | None] | None:
    """Normalize an error sequence argument: None, callable, or list."""
    if errors is None:
        return None
    if callable(errors):
        return errors
    vectors = [None if e is None else as_vector(e) for e in errors]

    def fn(n: int):
        return vectors[n] if n < len(vectors) else None

    return fn


def _gamma_fn(gamma) -> Callable[[int], float]:
    if callable(gamma):
        return gamma
    g = float(gamma)
    return lambda n: g


# ---------------------------------------------------------------------------
# mean-value Peaceman-Rachford
# ---------------------------------------------------------------------------

def peaceman_rachford(
    A: MonotoneMap,
    B: MonotoneMap,
    gamma: float,
    weights: WeightSchedule,
    x0,
    a_errors=None,
    b_errors=None,
    max_iters: int = 200,
    stop_residual: float = 1e-10,
    reference: Vector | None = None,
) -> SolverPreset:
    """Mean-value Peaceman-Rachford iteration for ``0 in A y + B y``.

        y_n     = J_{gamma B} xbar_n + b_n
        z_n     = J_{gamma A} (2 y_n - xbar_n) + a_n
        x_{n+1} = xbar_n + 2 (z_n - y_n)

    The unrelaxed reflected composition ``R_{gamma A} R_{gamma B}`` does not
    converge by itself in general; averaging over the orbit restores
    convergence, which is why the weight family must be nonnegative with
    ``inf_n mu_{n+1,n} mu_{n+1,n+1} > 0`` (window w >= 2 qualifies; cesaro
    and memoryless do not).  Internally this is a 1-layer stack with the
    nonexpansive composite and unit relaxation; the error made by perturbed
    resolvents is ``e_n = 2 a_n + R_{gamma A}(R_{gamma B} xbar_n + 2 b_n) -
    R_{gamma A}(R_{gamma B} xbar_n)``, of norm at most ``2(||a_n|| +
    ||b_n||)``.  The trace records the three-line quantities y_n, z_n; the
    reported solution is y_n.
    """
    if gamma <= 0:
        raise ConfigurationError("gamma must be positive")
    if not weights.nonnegative or weights.mann_product_bound() <= 0.0:
        raise ConfigurationError(
            f"weights {weights.describe()} rejected: the mean-value iteration needs "
            "a nonnegative family with inf mu_{n+1,n} mu_{n+1,n+1} > 0 (window w >= 2)"
        )
    validate_weights(weights, horizon=max(max_iters, 2))
    a_fn, b_fn = _seq(a_errors), _seq(b_errors)

    def jb(x):
        return B.resolvent(gamma, x)

    def ja(x):
        return A.resolvent(gamma, x)

    def rb(x):
        return 2.0 * jb(x) - x

    def ra(x):
        return 2.0 * ja(x) - x

    composite = AveragedOperator(
        fn=lambda x: ra(rb(x)),
        alpha=1.0,
        name=f"reflected_composition(gamma={gamma})",
    )
    stack = compose([composite])

    error_model: ErrorModel
    if a_fn is None and b_fn is None:
        error_model = ErrorModel()
    else:

        class _ResolventPerturbation(ErrorModel):
            def errors_for(self, n: int):
                a_n = a_fn(n) if a_fn is not None else None
                b_n = b_fn(n) if b_fn is not None else None
                if a_n is None and b_n is None:
                    return None

                def err(i, xbar):
                    e = np.zeros_like(xbar)
                    if a_n is not None:
                        e = e + 2.0 * a_n
                    if b_n is not None:
                        rbx = rb(xbar)
                        e = e + ra(rbx + 2.0 * b_n) - ra(rbx)
                    return e

                return err

            def budget(self, n: int, i: int) -> float:
                a_n = a_fn(n) if a_fn is not None else None
                b_n = b_fn(n) if b_fn is not None else None
                na = 0.0 if a_n is None else float(np.linalg.norm(a_n))
                nb = 0.0 if b_n is None else float(np.linalg.norm(b_n))
                return 2.0 * (na + nb)

        error_model = _ResolventPerturbation()

    def record(n, xbar):
        b_n = b_fn(n) if b_fn is not None else None
        a_n = a_fn(n) if a_fn is not None else None
        y = jb(xbar) if b_n is None else jb(xbar) + b_n
        z = ja(2.0 * y - xbar) if a_n is None else ja(2.0 * y - xbar) + a_n
        return {"y": y, "z": z}

    config = IterationConfig(
        stacks=stack,
        weights=weights,
        relaxation=RelaxationSchedule(policy="constant", value=1.0),
        x0=as_vector(x0),
        errors=error_model,
        max_iters=max_iters,
        stop_residual=stop_residual,
        reference=reference,
        aux_recorder=record,
    )
    return SolverPreset(
        name="peaceman_rachford",
        config=config,
        extract=lambda trace: trace.aux[-1]["y"],
        notes="solution reported through the inner resolvent of B",
    )


# ---------------------------------------------------------------------------
# forward-backward family
# ---------------------------------------------------------------------------

def forward_backward(
    A: MonotoneMap,
    B: Callable[[Vector], Vector] | None,
    beta: float | None,
    gamma,
    x0,
    epsilon: float = 0.1,
    lam: float | Callable[[int], float] | None = 1.0,
    weights: WeightSchedule | None = None,
    variant: str = "memoryless",
    eta: EtaSchedule | None = None,
    a_errors=None,
    b_errors=None,
    max_iters: int = 500,
    stop_residual: float = 1e-10,
    reference: Vector | None = None,
) -> SolverPreset:
    """Relaxed forward-backward splitting for ``0 in A x + B x``.

    The two-layer stack is ``T_{1,n} = J_{gamma_n A}`` (alpha 1/2) and
    ``T_{2,n} = Id - gamma_n B`` (alpha ``gamma_n / (2 beta)``), with
    per-layer errors ``a_n`` and ``-gamma_n b_n`` and composite constant
    ``phi_n = 2 / (4 - gamma_n / beta)``.  Steps must satisfy ``gamma_n in
    [eps, 2 beta / (1 + eps)]`` and relaxations ``lambda_n in [eps,
    1 + (1 - eps)(1 - gamma_n / (2 beta))]``.

    Variants: ``memoryless``, ``mean`` (an explicit nonnegative weight
    family), ``inertial`` (two-term extrapolation row built from ``eta``),
    and ``proximal_point`` (``B = 0``: the backward layer alone with
    ``phi = 1/2`` and ``gamma_n in [eps, inf)``).

    Inertial runs accept errors only in the unit-relaxation bounded-domain
    regime; anything else is rejected.
    """
    if variant not in ("memoryless", "mean", "inertial", "proximal_point"):
        raise ConfigurationError(f"unknown forward-backward variant {variant!r}")
    proximal_point = variant == "proximal_point" or B is None
    if proximal_point:
        B, beta = None, None
        if b_errors is not None:
            raise ConfigurationError(
                "the proximal-point variant has no forward layer to perturb"
            )
        if not 0.0 < epsilon < 0.5:
            raise ConfigurationError("epsilon must lie in (0, 1/2)")
    else:
        if beta is None or beta <= 0:
            raise ConfigurationError("cocoercivity constant beta must be positive")
        if not 0.0 < epsilon < min(0.5, beta):
            raise ConfigurationError(
                f"epsilon must lie in (0, min(1/2, beta)) = (0, {min(0.5, beta)})"
            )
    gamma_fn = _gamma_fn(gamma)
    gamma_hi = None if proximal_point else 2.0 * beta / (1.0 + epsilon)

    def checked_gamma(n: int) -> float:
        g = gamma_fn(n)
        if g < epsilon or (gamma_hi is not None and g > gamma_hi + 1e-12):
            hi = "inf" if gamma_hi is None else f"{gamma_hi}"
            raise ConfigurationError(
                f"gamma_{n} = {g} outside the admissible band [{epsilon}, {hi}]"
            )
        return g

    checked_gamma(0)

    if variant == "inertial":
        if eta is None:
            raise ConfigurationError("inertial variant needs an eta schedule")
        weights = inertial(eta)
        has_errors = a_errors is not None or b_errors is not None
        if has_errors:
            lam_fn = lam if callable(lam) else (lambda n: 1.0 if lam is None else float(lam))
            unit = all(lam_fn(n) == 1.0 for n in range(min(max_iters, 50)))
            if not (unit and A.bounded_domain):
                raise ConfigurationError(
                    "errors under inertial weights need unit relaxation and a "
                    "bounded-domain backward operator; rejected"
                )
    elif weights is None:
        weights = memoryless()
    if variant == "mean" and not weights.nonnegative:
        raise ConfigurationError("mean variant needs a nonnegative weight family")
    validate_weights(weights, horizon=max(max_iters, 2))

    a_fn, b_fn = _seq(a_errors), _seq(b_errors)

    def stack_for(n: int) -> LayerStack:
        g = checked_gamma(n)
        layers = [resolvent_operator(g, A)]
        if not proximal_point:
            layers.append(
                AveragedOperator(
                    fn=lambda x, g=g: x - g * B(x),
                    alpha=g / (2.0 * beta),
                    name=f"forward_step(gamma={g})",
                    beta=beta,
                )
            )
        return compose(layers)

    per_layer = None
    if a_fn is not None or b_fn is not None:
        layers_err = [a_fn]
        if not proximal_point:
            layers_err.append(
                (lambda n: None)
                if b_fn is None
                else (lambda n: None if b_fn(n) is None else -gamma_fn(n) * b_fn(n))
            )
        per_layer = SequenceError(layers_err)

    relax = RelaxationSchedule(
        policy="fb_band", value=lam, epsilon=epsilon, beta=beta, gamma=gamma_fn
    )
    config = IterationConfig(
        stacks=stack_for,
        weights=weights,
        relaxation=relax,
        x0=as_vector(x0),
        errors=per_layer if per_layer is not None else ErrorModel(),
        max_iters=max_iters,
        stop_residual=stop_residual,
        reference=reference,
    )
    return SolverPreset(
        name=f"forward_backward[{variant}]",
        config=config,
        extract=lambda trace: trace.final_point,
    )


# ---------------------------------------------------------------------------
# Polyak subgradient projection
# ---------------------------------------------------------------------------

def polyak_subgradient(
    f: Callable[[Vector], float],
    s: Callable[[Vector], Vector],
    theta: float,
    region_projector: AveragedOperator,
    x0,
    xi: float | Callable[[int], float] = 1.0,
    lam: float = 1.0,
    eta_low: float = 0.5,
    epsilon: float = 0.05,
    weights: WeightSchedule | None = None,
    max_iters: int = 500,
    stop_residual: float = 1e-10,
    reference: Vector | None = None,
) -> SolverPreset:
    """Level-set subgradient projection for ``min f over C`` with known
    optimal value ``theta``.

    Stack: ``T_1 = P_C`` and ``T_2 = Id + xi_n (G - Id)`` where ``G`` is the
    subgradient projector onto ``{f <= theta}`` (quasinonexpansive last
    layer, so a common fixed point across layers is assumed: the problem must
    be consistent).  Bands: ``eta_low in (0, 1)``, ``eps in (0, eta_low /
    (2 + eta_low))``, ``xi_n in [eta_low, 2 - eta_low]``, ``lambda_n in
    [eps, (1 - eps)(2 - xi_n / 2)]``.  The start is projected into C.
    """
    if not 0.0 < eta_low < 1.0:
        raise ConfigurationError("eta_low must lie in (0, 1)")
    eps_cap = eta_low / (2.0 + eta_low)
    if not 0.0 < epsilon < eps_cap:
        raise ConfigurationError(
            f"epsilon must lie in (0, eta/(2+eta)) = (0, {eps_cap}), got {epsilon}"
        )
    if weights is None:
        weights = memoryless()
    if not weights.nonnegative:
        raise ConfigurationError("subgradient projection needs nonnegative weights")
    validate_weights(weights, horizon=max(max_iters, 2))
    xi_fn = _gamma_fn(xi)
    g_op = subgradient_projector(f, s, theta)

    def stack_for(n: int) -> LayerStack:
        x = xi_fn(n)
        if not eta_low <= x <= 2.0 - eta_low:
            raise ConfigurationError(
                f"xi_{n} = {x} outside [eta, 2-eta] = [{eta_low}, {2.0 - eta_low}]"
            )
        return compose([region_projector, relaxed(g_op, x)])

    for n in range(max_iters):
        x = xi_fn(n)
        if not eta_low <= x <= 2.0 - eta_low:
            raise ConfigurationError(
                f"xi_{n} = {x} outside [eta, 2-eta] = [{eta_low}, {2.0 - eta_low}]"
            )
        cap = (1.0 - epsilon) * (2.0 - x / 2.0)
        if not epsilon <= lam <= cap:
            raise ConfigurationError(
                f"lambda = {lam} outside [eps, (1-eps)(2 - xi/2)] = [{epsilon}, {cap}] at n={n}"
            )

    config = IterationConfig(
        stacks=stack_for,
        weights=weights,
        relaxation=RelaxationSchedule(policy="constant", value=lam),
        x0=region_projector.fn(as_vector(x0)),
        max_iters=max_iters,
        stop_residual=stop_residual,
        reference=reference,
    )
    return SolverPreset(
        name="polyak_subgradient",
        config=config,
        extract=lambda trace: trace.final_point,
        notes="theta must be the exact optimal value (problem metadata)",
    )


# ---------------------------------------------------------------------------
# Krasnoselskii-Mann variants
# ---------------------------------------------------------------------------

def krasnoselskii_mann(
    T: AveragedOperator,
    x0,
    variant: str = "mean",
    weights: WeightSchedule | None = None,
    errors=None,
    eta: EtaSchedule | None = None,
    lam: float | Callable[[int], float] = 1.0,
    sigma: float = 0.2,
    theta_tune: float = 2.0 / 3.0,
    demiclosed: bool = True,
    max_iters: int = 200,
    stop_residual: float = 1e-10,
    reference: Vector | None = None,
) -> SolverPreset:
    """Fixed-point iteration of a single quasinonexpansive operator.

    ``memoryless``: the plain relaxed baseline ``x <- x + lam (Tx - x)``
    (which can fail to converge; it exists as the comparison point for the
    averaged variants).  ``mean``: applies ``T`` to a nonnegative average of
    the orbit with unit relaxation and summable errors; the weight family
    needs ``inf_n mu_{n+1,n} mu_{n+1,n+1} > 0`` (window w >= 2).
    ``inertial``: two-term extrapolation, error-free, with the (eta, sigma,
    theta_tune) relaxation band validated on the supplied sequences
    (phi == 1 here).

    Demiclosedness of ``Id - T`` at 0 is asserted metadata, not verified; it
    gates which convergence conclusions the caller may draw.
    """
    stack = compose([
        AveragedOperator(
            fn=T.fn, alpha=1.0, kind=T.kind,
            name=T.name or "fixed_point_map", fix_oracle=T.fix_oracle,
        )
    ])
    x0 = as_vector(x0)
    if variant == "memoryless":
        e_fn = _seq(errors)
        config = IterationConfig(
            stacks=stack,
            weights=memoryless(),
            relaxation=RelaxationSchedule(policy="constant", value=lam),
            x0=x0,
            errors=SequenceError([e_fn]) if e_fn is not None else ErrorModel(),
            max_iters=max_iters,
            stop_residual=stop_residual,
            reference=reference,
        )
    elif variant == "mean":
        if weights is None or not weights.nonnegative or weights.mann_product_bound() <= 0.0:
            raise ConfigurationError(
                "mean variant needs a nonnegative family with "
                "inf mu_{n+1,n} mu_{n+1,n+1} > 0 (window w >= 2)"
            )
        validate_weights(weights, horizon=max(max_iters, 2))
        e_fn = _seq(errors)
        config = IterationConfig(
            stacks=stack,
            weights=weights,
            relaxation=RelaxationSchedule(policy="constant", value=1.0),
            x0=x0,
            errors=SequenceError([e_fn]) if e_fn is not None else ErrorModel(),
            max_iters=max_iters,
            stop_residual=stop_residual,
            reference=reference,
        )
    elif variant == "inertial":
        if eta is None:
            raise ConfigurationError("inertial variant needs an eta schedule")
        if errors is not None:
            raise ConfigurationError("the inertial variant is error-free; rejected")
        if eta.sup() >= 1.0:
            raise ConfigurationError(
                "the inertial fixed-point variant needs sup eta < 1"
            )
        lam_fn = _gamma_fn(lam)
        horizon = max_iters + 1
        params = InertialBandParams(eta=eta.sup(), sigma=sigma, theta_tune=theta_tune)
        report = inertial_band_validate(
            params,
            phi_seq=np.ones(horizon + 1),
            lambda_seq=np.array([lam_fn(n) for n in range(horizon + 1)]),
            eta_seq=np.array([eta.value(n) for n in range(horizon + 1)]),
        )
        if not report.ok:
            raise ConfigurationError(
                f"inertial band violated ({report.violated}) at n={report.first_violation}"
            )
        config = IterationConfig(
            stacks=stack,
            weights=inertial(eta),
            relaxation=RelaxationSchedule(policy="constant", value=lam),
            x0=x0,
            max_iters=max_iters,
            stop_residual=stop_residual,
            reference=reference,
        )
    else:
        raise ConfigurationError(f"unknown fixed-point variant {variant!r}")
    return SolverPreset(
        name=f"krasnoselskii_mann[{variant}]",
        config=config,
        extract=lambda trace: trace.final_point,
        demiclosed=demiclosed,
    )
