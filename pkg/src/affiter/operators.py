"""Catalog and algebra of averaged (quasi)nonexpansive operators.

An operator ``T`` is alpha-averaged (quasi)nonexpansive when
``(1 - 1/alpha) Id + (1/alpha) T`` is (quasi)nonexpansive, ``alpha in (0, 1]``.
For a nonexpansive ``T`` with ``alpha < 1`` this is equivalent to

    ||Tu - Tv||^2 <= ||u - v||^2
                     - ((1-alpha)/alpha) ||(Id-T)u - (Id-T)v||^2

for all ``u, v``; for the quasinonexpansive class the same contraction is only
required against fixed points ``y``:

    2 (1-alpha) <y - Tx, x - Tx> <= (2 alpha - 1) (||x - y||^2 - ||Tx - y||^2).

A composition ``T_1 ... T_m`` of alpha_i-averaged layers is itself averaged
with constant

    phi = (1 + (sum_i alpha_i / (1 - alpha_i))^-1)^-1    if all alpha_i < 1,
    phi = 1                                              otherwise,

which caps the admissible relaxation at ``1/phi``.  Only the last layer of a
stack may be merely quasinonexpansive; earlier layers must be nonexpansive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateSelectionWarning
from .space import Vector, as_vector, check_same_dim

NONEXPANSIVE = "nonexpansive"
QUASINONEXPANSIVE = "quasinonexpansive"

#: absolute slack tolerance for sampled averagedness checks
CERTIFICATE_TOL = 1e-9


@dataclass(frozen=True)
class AveragedOperator:
    """An evaluable map with a declared averaging constant and class.

    Parameters
    ----------
    fn : callable
        The map ``x -> Tx`` on 1-D float64 arrays.
    alpha : float
        Averaging constant in ``(0, 1]``; ``alpha = 1`` means plain
        (quasi)nonexpansive.
    kind : str
        ``"nonexpansive"`` or ``"quasinonexpansive"``.
    fix_oracle : callable, optional
        Predicate ``x -> bool`` deciding fixed-point membership exactly
        (used by test problems; falls back to a residual check).
    beta : float, optional
        Cocoercivity constant of the displaced map for gradient steps.
    bounded_range : bool
        Whether the range of the operator is bounded (resolvents of
        bounded-domain maps, projectors onto bounded sets).
    """

    fn: Callable[[Vector], Vector]
    alpha: float
    kind: str = NONEXPANSIVE
    name: str = ""
    fix_oracle: Callable[[Vector], bool] | None = None
    beta: float | None = None
    bounded_range: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind not in (NONEXPANSIVE, QUASINONEXPANSIVE):
            raise ConfigurationError(f"unknown operator class {self.kind!r}")

    def __call__(self, x: Vector) -> Vector:
        return self.fn(x)

    def fixes(self, x: Vector, tol: float = 1e-10) -> bool:
        if self.fix_oracle is not None:
            return bool(self.fix_oracle(x))
        return float(np.linalg.norm(self.fn(x) - x)) <= tol


# ---------------------------------------------------------------------------
# monotone-map descriptors (closed-form resolvents only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneMap:
    """A maximally monotone map with a closed-form resolvent ``(Id + g A)^-1``.

    ``graph_contains(y, u)`` decides ``u in A(y)`` where that is finitely
    checkable; ``selection`` evaluates one element of ``A(y)`` when a natural
    single-valued choice exists.
    """

    name: str
    resolvent: Callable[[float, Vector], Vector]
    mapping: Callable[[Vector], Vector] | None = None
    selection: Callable[[Vector], Vector] | None = None
    graph_contains: Callable[[Vector, Vector, float], bool] | None = None
    bounded_domain: bool = False


def soft_threshold(x: Vector, t: float) -> Vector:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def l1_subdifferential(weight: float = 1.0) -> MonotoneMap:
    """Subdifferential of ``weight * ||.||_1``; resolvent is soft thresholding."""
    if weight <= 0:
        raise ConfigurationError("l1 weight must be positive")

    def graph(y, u, tol=1e-9):
        on = y != 0.0
        ok_on = np.all(np.abs(u[on] - weight * np.sign(y[on])) <= tol)
        ok_off = np.all(np.abs(u[~on]) <= weight + tol)
        return bool(ok_on and ok_off)

    return MonotoneMap(
        name=f"l1_subdifferential(weight={weight})",
        resolvent=lambda g, x: soft_threshold(x, g * weight),
        selection=lambda y: weight * np.sign(y),
        graph_contains=graph,
    )


def affine_monotone(matrix, offset) -> MonotoneMap:
    """Single-valued affine map ``x -> M x + c`` with ``M`` positive semidefinite.

    The resolvent solves ``(I + g M) y = x - g c``.  Monotonicity of ``M`` is
    the caller's assertion; it is exercised by the sampled certificates.
    """
    c = as_vector(offset)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 0:
        m = float(m) * np.eye(c.size)
    if m.shape != (c.size, c.size):
        raise ConfigurationError(f"matrix shape {m.shape} does not match offset {c.size}")
    eye = np.eye(c.size)

    def mapping(x):
        return m @ x + c

    def resolvent(g, x):
        return np.linalg.solve(eye + g * m, x - g * c)

    return MonotoneMap(
        name="affine_monotone",
        resolvent=resolvent,
        mapping=mapping,
        selection=mapping,
        graph_contains=lambda y, u, tol=1e-9: bool(
            np.linalg.norm(u - mapping(y)) <= tol
        ),
    )


def normal_cone(set_kind: str, bounded: bool | None = None, **params) -> MonotoneMap:
    """Normal cone of one of the catalog convex sets; resolvent is the projector."""
    proj = projector(set_kind, **params)
    if bounded is None:
        bounded = set_kind in ("box", "ball")
    return MonotoneMap(
        name=f"normal_cone({set_kind})",
        resolvent=lambda g, x: proj.fn(x),
        bounded_domain=bounded,
    )


# ---------------------------------------------------------------------------
# operator factories
# ---------------------------------------------------------------------------

def prox_l1(gamma: float, weight: float = 1.0) -> AveragedOperator:
    """Soft-thresholding prox of ``weight * ||.||_1`` at step ``gamma``; firmly nonexpansive."""
    if gamma <= 0:
        raise ConfigurationError("prox step gamma must be positive")
    t = gamma * weight
    return AveragedOperator(
        fn=lambda x: soft_threshold(x, t),
        alpha=0.5,
        name=f"prox_l1(gamma={gamma})",
        fix_oracle=lambda x: bool(np.all(x == 0.0)),
    )


def projector(set_kind: str, **params) -> AveragedOperator:
    """Euclidean projector onto one of the catalog convex sets.

    Kinds: ``box(lo, hi)``, ``ball(center, radius)``, ``halfspace(normal,
    offset)`` for ``{x : <normal, x> <= offset}``, ``nonneg``, and
    ``hyperplane(normal, offset)`` for ``{x : <normal, x> = offset}``.
    """
    tol = 1e-12
    if set_kind == "box":
        lo, hi = as_vector(params["lo"]), as_vector(params["hi"])
        if np.any(lo > hi):
            raise ConfigurationError("box has lo > hi")
        fn = lambda x: np.clip(x, lo, hi)
        member = lambda x: bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))
        bounded = True
    elif set_kind == "ball":
        center, radius = as_vector(params["center"]), float(params["radius"])
        if radius <= 0:
            raise ConfigurationError("ball radius must be positive")

        def fn(x):
            d = x - center
            nd = np.linalg.norm(d)
            return x if nd <= radius else center + (radius / nd) * d

        member = lambda x: bool(np.linalg.norm(x - center) <= radius + tol)
        bounded = True
    elif set_kind == "halfspace":
        a, b = as_vector(params["normal"]), float(params["offset"])
        na2 = float(a @ a)
        if na2 == 0.0:
            raise ConfigurationError("halfspace normal must be nonzero")
        fn = lambda x: x - (max(float(a @ x) - b, 0.0) / na2) * a
        member = lambda x: bool(float(a @ x) <= b + tol)
        bounded = False
    elif set_kind == "nonneg":
        fn = lambda x: np.maximum(x, 0.0)
        member = lambda x: bool(np.all(x >= -tol))
        bounded = False
    elif set_kind == "hyperplane":
        a, b = as_vector(params["normal"]), float(params["offset"])
        na2 = float(a @ a)
        if na2 == 0.0:
            raise ConfigurationError("hyperplane normal must be nonzero")
        fn = lambda x: x - ((float(a @ x) - b) / na2) * a
        member = lambda x: bool(abs(float(a @ x) - b) <= tol)
        bounded = False
    else:
        raise ConfigurationError(f"unknown projector set {set_kind!r}")
    return AveragedOperator(
        fn=fn,
        alpha=0.5,
        name=f"projector({set_kind})",
        fix_oracle=member,
        bounded_range=bounded,
    )


def gradient_step(gamma: float, grad: Callable[[Vector], Vector], beta: float) -> AveragedOperator:
    """Explicit step ``Id - gamma * grad`` for a ``beta``-cocoercive gradient.

    Averaged with constant ``gamma / (2 beta)``; requires ``0 < gamma < 2 beta``.
    """
    if beta <= 0:
        raise ConfigurationError("cocoercivity constant beta must be positive")
    if not 0.0 < gamma < 2.0 * beta:
        raise ConfigurationError(
            f"gradient step gamma={gamma} outside (0, 2*beta)=(0, {2 * beta})"
        )
    return AveragedOperator(
        fn=lambda x: x - gamma * grad(x),
        alpha=gamma / (2.0 * beta),
        name=f"gradient_step(gamma={gamma}, beta={beta})",
        beta=beta,
    )


def resolvent_operator(gamma: float, mono: MonotoneMap) -> AveragedOperator:
    """Resolvent ``(Id + gamma A)^-1`` of a catalog monotone map; firmly nonexpansive."""
    if gamma <= 0:
        raise ConfigurationError("resolvent step gamma must be positive")
    return AveragedOperator(
        fn=lambda x: mono.resolvent(gamma, x),
        alpha=0.5,
        name=f"resolvent({mono.name}, gamma={gamma})",
        bounded_range=mono.bounded_domain,
    )


def reflector_operator(gamma: float, mono: MonotoneMap) -> AveragedOperator:
    """Reflected resolvent ``2 (Id + gamma A)^-1 - Id``; nonexpansive (alpha = 1)."""
    if gamma <= 0:
        raise ConfigurationError("reflector step gamma must be positive")
    return AveragedOperator(
        fn=lambda x: 2.0 * mono.resolvent(gamma, x) - x,
        alpha=1.0,
        name=f"reflector({mono.name}, gamma={gamma})",
    )


def subgradient_projector(
    f: Callable[[Vector], float],
    s: Callable[[Vector], Vector],
    theta: float,
) -> AveragedOperator:
    """One subgradient step toward the sublevel set ``{f <= theta}``.

    Returns ``x`` unchanged when ``f(x) <= theta``; otherwise steps along the
    selection ``s(x)``.  Firmly quasinonexpansive.  A zero selection at a
    point strictly above the level contradicts attainment of ``theta`` and
    signals a bad selection oracle; the input is returned unchanged and a
    ``DegenerateSelectionWarning`` is emitted.
    """

    def fn(x):
        fx = float(f(x))
        if fx <= theta:
            return x.copy()
        g = s(x)
        ng2 = float(g @ g)
        if ng2 == 0.0:
            warnings.warn(
                f"zero subgradient selection at a point with f(x)={fx} > theta={theta}",
                DegenerateSelectionWarning,
                stacklevel=2,
            )
            return x.copy()
        return x + ((theta - fx) / ng2) * g

    return AveragedOperator(
        fn=fn,
        alpha=0.5,
        kind=QUASINONEXPANSIVE,
        name=f"subgradient_projector(theta={theta})",
        fix_oracle=lambda x: bool(float(f(x)) <= theta + 1e-12),
    )


def relaxed(op: AveragedOperator, xi: float) -> AveragedOperator:
    """Relaxation ``Id + xi (G - Id)`` of a firmly (quasi)nonexpansive ``G``.

    Requires ``G.alpha == 1/2`` and ``xi in (0, 2)``; the result is
    ``xi/2``-averaged and inherits the class of ``G``.
    """
    if op.alpha != 0.5:
        raise ConfigurationError("relaxed() needs a firmly (quasi)nonexpansive operator")
    if not 0.0 < xi < 2.0:
        raise ConfigurationError(f"relaxation xi={xi} outside (0, 2)")
    return AveragedOperator(
        fn=lambda x: x + xi * (op.fn(x) - x),
        alpha=xi / 2.0,
        kind=op.kind,
        name=f"relaxed({op.name}, xi={xi})",
        fix_oracle=op.fix_oracle,
        bounded_range=op.bounded_range,
    )


def linear_operator(matrix, alpha: float = 1.0, kind: str = NONEXPANSIVE) -> AveragedOperator:
    """Linear map with a user-asserted averaging constant and class.

    There is no closed-form alpha for a general matrix, so the assertion is
    meant to be exercised through ``averagedness_certificate``.
    """
    m = np.asarray(matrix, dtype=np.float64)
    fix = None
    if np.linalg.matrix_rank(m - np.eye(m.shape[0])) == m.shape[0]:
        fix = lambda x: bool(np.allclose(x, 0.0, atol=1e-12))
    return AveragedOperator(
        fn=lambda x: m @ x,
        alpha=alpha,
        kind=kind,
        name="linear",
        fix_oracle=fix,
    )


def identity_operator() -> AveragedOperator:
    return AveragedOperator(fn=lambda x: x.copy(), alpha=1.0, name="identity",
                            fix_oracle=lambda x: True)


_CATALOG = {
    "prox_l1": prox_l1,
    "projector": projector,
    "gradient_step": gradient_step,
    "resolvent": resolvent_operator,
    "reflector": reflector_operator,
    "subgradient_projector": subgradient_projector,
    "relaxed": relaxed,
    "linear": linear_operator,
    "identity": identity_operator,
}


def make_operator(name: str, **params) -> AveragedOperator:
    """Build a catalog operator from a descriptor name and parameters."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown operator descriptor {name!r}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# layer stacks
# ---------------------------------------------------------------------------

def composite_phi(alphas: Sequence[float]) -> float:
    """Averaging constant of a composition from its per-layer constants."""
    alphas = list(alphas)
    if not alphas:
        raise ConfigurationError("empty layer list")
    if max(alphas) < 1.0:
        s = sum(a / (1.0 - a) for a in alphas)
        return 1.0 / (1.0 + 1.0 / s)
    return 1.0


@dataclass(frozen=True)
class LayerStack:
    """Ordered composition ``T_1 ... T_m`` (index 0 is the outermost layer)."""

    layers: tuple[AveragedOperator, ...]
    phi: float
    case: str  # "a": all layers nonexpansive, m > 1; "b": quasinonexpansive
    # last layer with alpha < 1, m > 1; "c": single layer

    @property
    def m(self) -> int:
        return len(self.layers)


def compose(layers: Sequence[AveragedOperator]) -> LayerStack:
    """Validate layer classes and derive the composite averaging constant.

    Only the last layer may be quasinonexpansive; a quasinonexpansive last
    layer in a multi-layer stack additionally needs ``alpha < 1`` and a
    common fixed point across layers (asserted by the caller, not checked).
    """
    layers = tuple(layers)
    if not layers:
        raise ConfigurationError("a stack needs at least one layer")
    m = len(layers)
    for i, op in enumerate(layers[:-1]):
        if op.kind != NONEXPANSIVE:
            raise ConfigurationError(
                f"layer {i + 1} of {m} is {op.kind}; only the last layer may be"
            )
    last = layers[-1]
    if m == 1:
        case = "c"
    elif last.kind == QUASINONEXPANSIVE:
        if last.alpha >= 1.0:
            raise ConfigurationError(
                "a quasinonexpansive last layer in a multi-layer stack needs alpha < 1"
            )
        case = "b"
    else:
        case = "a"
    return LayerStack(layers=layers, phi=composite_phi(op.alpha for op in layers), case=case)


@dataclass(frozen=True)
class StackApplication:
    """Result of one (possibly perturbed) pass through a stack."""

    value: Vector
    error_norms: tuple[float, ...]
    aggregate_error: float


def apply_stack(stack: LayerStack, x: Vector, errors=None) -> StackApplication:
    """Evaluate ``T_1(T_2(... T_m x + e_m ...) + e_2) + e_1``.

    ``errors`` is ``None`` (clean pass), a sequence of per-layer vectors (or
    ``None`` entries, outermost first), or a callable ``(i, layer_input) ->
    vector | None`` with 1-based layer index.  The aggregate error equals
    ``sum_i ||e_i||``; when the outer layers are nonexpansive it bounds the
    deviation of the perturbed output from the clean composite.
    """
    m = stack.m
    if errors is not None and not callable(errors) and len(errors) != m:
        raise ConfigurationError(f"expected {m} per-layer errors, got {len(errors)}")
    y = x
    norms = [0.0] * m
    for i in range(m, 0, -1):
        layer = stack.layers[i - 1]
        layer_input = y
        y = layer.fn(layer_input)
        e = None
        if errors is not None:
            e = errors(i, layer_input) if callable(errors) else errors[i - 1]
        if e is not None:
            check_same_dim(y, e)
            y = y + e
            norms[i - 1] = float(np.linalg.norm(e))
    return StackApplication(value=y, error_norms=tuple(norms), aggregate_error=sum(norms))


def tail_apply(stack: LayerStack, i: int, x: Vector) -> Vector:
    """Apply the inner tail ``T_{i+1} ... T_m`` (identity when ``i == m``)."""
    if not 1 <= i <= stack.m:
        raise ConfigurationError(f"tail index {i} outside 1..{stack.m}")
    y = x
    for k in range(stack.m, i, -1):
        y = stack.layers[k - 1].fn(y)
    return y


# ---------------------------------------------------------------------------
# sampled averagedness certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AveragednessReport:
    operator: str
    alpha: float
    kind: str
    samples: int
    seed: int
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def averagedness_certificate(
    op: AveragedOperator,
    dim: int,
    sample_count: int = 1000,
    seed: int = 0,
    fixed_points: Sequence[Vector] | None = None,
    scale: float = 4.0,
    tolerance: float = CERTIFICATE_TOL,
) -> AveragednessReport:
    """Sampled check of the declared averaging constant.

    For the nonexpansive class the two-point contraction inequality is
    evaluated on random pairs; for the quasinonexpansive class the inner
    product form is evaluated against the supplied fixed points.  The check
    passes when the largest violation stays within ``tolerance``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    if op.kind == QUASINONEXPANSIVE:
        if not fixed_points:
            raise ConfigurationError(
                "quasinonexpansive certificate needs known fixed points"
            )
        fps = [as_vector(p, dim) for p in fixed_points]
        for k in range(sample_count):
            x = scale * rng.standard_normal(dim)
            y = fps[k % len(fps)]
            tx = op.fn(x)
            lhs = 2.0 * (1.0 - op.alpha) * float((y - tx) @ (x - tx))
            rhs = (2.0 * op.alpha - 1.0) * (
                float((x - y) @ (x - y)) - float((tx - y) @ (tx - y))
            )
            worst = max(worst, lhs - rhs)
    else:
        coeff = (1.0 - op.alpha) / op.alpha
        for _ in range(sample_count):
            u = scale * rng.standard_normal(dim)
            v = scale * rng.standard_normal(dim)
            tu, tv = op.fn(u), op.fn(v)
            d_im = tu - tv
            d = u - v
            r = (u - tu) - (v - tv)
            viol = float(d_im @ d_im) + coeff * float(r @ r) - float(d @ d)
            worst = max(worst, viol)
    return AveragednessReport(
        operator=op.name or repr(op.fn),
        alpha=op.alpha,
        kind=op.kind,
        samples=sample_count,
        seed=seed,
        max_violation=worst,
        tolerance=tolerance,
    )
