"""
Closed-form wave snapshots on the space-time rectangle (0,1) x (-1,1).

The snapshot with wave speed mu is the Riemann solution
    phi_mu(t, x) =  1  if x < -mu t
                   -1  if x >= mu t
                    0  otherwise
and every L2 quantity of their span is computed exactly from
(phi_a, phi_b) = 2 - max(a, b). A tensor Gauss-Legendre oracle that splits
along the cone lines x = +-mu t checks those closed forms and the
distributional wave equation against smooth bump test functions.
"""

import math
from functools import lru_cache
from typing import ClassVar, Dict, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import DomainError, FamilyMismatchError, InvalidParameterError

T_MIN, T_MAX = 0.0, 1.0
X_MIN, X_MAX = -1.0, 1.0
DOMAIN_AREA = (T_MAX - T_MIN) * (X_MAX - X_MIN)
MIN_QUAD_POINTS = 8
QUAD_PANELS = 4

ArrayLike = Union[float, np.ndarray]


class SpaceTimePoint(NamedTuple):
    t: float
    x: float


def _check_parameter(mu: float, name: str = "mu") -> float:
    mu = float(mu)
    if not 0.0 <= mu <= 1.0:
        raise InvalidParameterError(f"{name}={mu} outside the parameter set [0, 1]")
    return mu


def check_domain(t: ArrayLike, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    inside = (t >= T_MIN) & (t <= T_MAX) & (x >= X_MIN) & (x <= X_MAX)
    if not np.all(inside):
        raise DomainError("point outside the closed domain [0, 1] x [-1, 1]")
    return t, x


def as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def initial_data(x: ArrayLike) -> ArrayLike:
    """The Riemann datum u_0: 1 left of the origin, -1 from the origin on."""
    x = np.asarray(x, dtype=float)
    return as_output(np.where(x < 0.0, 1.0, -1.0))


def heaviside(z: ArrayLike) -> ArrayLike:
    """Heaviside step with H(0) = 1."""
    z = np.asarray(z, dtype=float)
    return as_output(np.where(z >= 0.0, 1.0, 0.0))


def eval_phi(mu: float, t: ArrayLike, x: ArrayLike) -> ArrayLike:
    mu = _check_parameter(mu)
    t, x = check_domain(t, x)
    cone = mu * t
    return as_output(np.where(x < -cone, 1.0, np.where(x >= cone, -1.0, 0.0)))


def _check_hat_index(M: int, m: int) -> None:
    if M < 1:
        raise InvalidParameterError(f"grid count M={M} must be positive")
    if not 1 <= m <= M:
        raise InvalidParameterError(f"index m={m} outside 1..{M}")


def eval_psi(M: int, m: int, t: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Hat difference psi_{M,m} = phi_{(m-1)/M} - phi_{m/M}, by cases."""
    _check_hat_index(M, m)
    t, x = check_domain(t, x)
    inner = ((m - 1) / M) * t
    outer = (m / M) * t
    left = (x >= -outer) & (x < -inner)
    right = (x >= inner) & (x < outer)
    return as_output(np.where(left, 1.0, np.where(right, -1.0, 0.0)))


def dalembert_eval(mu: float, t: ArrayLike, x: ArrayLike) -> ArrayLike:
    mu = _check_parameter(mu)
    t, x = check_domain(t, x)
    shift = mu * t
    return as_output(0.5 * (np.asarray(initial_data(x + shift)) + np.asarray(initial_data(x - shift))))


def eval_fundamental(mu: float, t: ArrayLike, x: ArrayLike) -> ArrayLike:
    """G_mu(t, x) = (H(x + mu t) - H(x - mu t)) / (2 mu)."""
    mu = _check_parameter(mu)
    if mu == 0.0:
        raise InvalidParameterError("the fundamental solution is undefined for mu = 0")
    t, x = check_domain(t, x)
    shift = mu * t
    jump = np.asarray(heaviside(x + shift)) - np.asarray(heaviside(x - shift))
    return as_output(jump / (2.0 * mu))


def inner_product_phi(a: float, b: float) -> float:
    """Exact (phi_a, phi_b) in L2 of the domain."""
    a = _check_parameter(a, "a")
    b = _check_parameter(b, "b")
    return 2.0 - max(a, b)


class WaveCombination(BaseModel):
    """Finite linear combination sum_mu c_mu phi_mu."""

    model_config = ConfigDict(frozen=True)

    family: ClassVar[str] = "wave"

    terms: Dict[float, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _parameters_in_range(self) -> "WaveCombination":
        for mu in self.terms:
            _check_parameter(mu)
        return self

    def __add__(self, other: "WaveLike") -> "WaveCombination":
        merged = dict(self.terms)
        for mu, c in as_combination(other).terms.items():
            merged[mu] = merged.get(mu, 0.0) + c
        return WaveCombination(terms=merged)

    def __neg__(self) -> "WaveCombination":
        return self * -1.0

    def __sub__(self, other: "WaveLike") -> "WaveCombination":
        return self + (-as_combination(other))

    def __mul__(self, scalar: float) -> "WaveCombination":
        return WaveCombination(terms={mu: scalar * c for mu, c in self.terms.items()})

    __rmul__ = __mul__

    @property
    def cut_slopes(self) -> Tuple[float, ...]:
        return tuple(sorted({s for mu in self.terms for s in (-mu, mu)}))

    @property
    def label(self) -> str:
        return " ".join(f"{c:+.6g}*phi[{mu:.6g}]" for mu, c in sorted(self.terms.items()))

    def evaluate(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        t, x = check_domain(t, x)
        total = np.zeros(np.broadcast(t, x).shape)
        for mu, c in self.terms.items():
            total = total + c * np.asarray(eval_phi(mu, t, x))
        return as_output(total)

    def inner(self, other: "WaveLike") -> float:
        return inner_product(self, other)


class WaveSnapshot(BaseModel):
    """The analytic solution phi_mu for one wave speed."""

    model_config = ConfigDict(frozen=True)

    family: ClassVar[str] = "wave"

    mu: float = Field(ge=0.0, le=1.0)

    @property
    def cut_slopes(self) -> Tuple[float, ...]:
        return (-self.mu, self.mu)

    @property
    def label(self) -> str:
        return f"phi[{self.mu:.6g}]"

    @property
    def squared_norm(self) -> float:
        return 2.0 - self.mu

    def evaluate(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        return eval_phi(self.mu, t, x)

    def initial(self, x: ArrayLike) -> ArrayLike:
        return initial_data(x)

    def as_combination(self) -> WaveCombination:
        return WaveCombination(terms={self.mu: 1.0})

    def inner(self, other: "WaveLike") -> float:
        return inner_product(self, other)


class HatFunction(BaseModel):
    """psi_{M,m}, optionally rescaled; scale = sqrt(M) gives the orthonormal family."""

    model_config = ConfigDict(frozen=True)

    family: ClassVar[str] = "wave"

    M: int = Field(ge=1)
    m: int = Field(ge=1)
    scale: float = 1.0

    @model_validator(mode="after")
    def _index_in_range(self) -> "HatFunction":
        _check_hat_index(self.M, self.m)
        return self

    @classmethod
    def orthonormal(cls, M: int, m: int) -> "HatFunction":
        return cls(M=M, m=m, scale=math.sqrt(M))

    @property
    def inner_mu(self) -> float:
        return (self.m - 1) / self.M

    @property
    def outer_mu(self) -> float:
        return self.m / self.M

    @property
    def cut_slopes(self) -> Tuple[float, ...]:
        return (-self.outer_mu, -self.inner_mu, self.inner_mu, self.outer_mu)

    @property
    def label(self) -> str:
        prefix = "" if self.scale == 1.0 else f"{self.scale:.6g}*"
        return f"{prefix}psi[{self.M},{self.m}]"

    @property
    def squared_norm(self) -> float:
        return self.scale ** 2 / self.M

    def evaluate(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        return as_output(self.scale * np.asarray(eval_psi(self.M, self.m, t, x)))

    def as_combination(self) -> WaveCombination:
        return WaveCombination(terms={self.inner_mu: self.scale, self.outer_mu: -self.scale})

    def inner(self, other: "WaveLike") -> float:
        return inner_product(self, other)


WaveLike = Union[WaveSnapshot, HatFunction, WaveCombination]


def as_combination(f: WaveLike) -> WaveCombination:
    if isinstance(f, WaveCombination):
        return f
    if isinstance(f, (WaveSnapshot, HatFunction)):
        return f.as_combination()
    raise FamilyMismatchError(f"{type(f).__name__} is not a combination of wave snapshots")


def inner_product(f: WaveLike, g: WaveLike) -> float:
    """Exact L2 pairing of two wave combinations by bilinear expansion."""
    terms_f = as_combination(f).terms
    terms_g = as_combination(g).terms
    return math.fsum(
        cf * cg * inner_product_phi(a, b)
        for a, cf in terms_f.items()
        for b, cg in terms_g.items()
    )


class FrozenProfile(BaseModel):
    """u_0(x) held constant in time; not a solution for any mu > 0."""

    model_config = ConfigDict(frozen=True)

    @property
    def cut_slopes(self) -> Tuple[float, ...]:
        return (0.0,)

    def evaluate(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        _, x = check_domain(t, x)
        return initial_data(x)


# Quadrature

@lru_cache(maxsize=None)
def _reference_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [lo, hi]."""
    nodes, weights = _reference_rule(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


@lru_cache(maxsize=None)
def composite_rule(n: int, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """``panels`` equal panels of n Gauss-Legendre points on [0, 1]."""
    if n < 1 or panels < 1:
        raise InvalidParameterError("a composite rule needs at least one panel and one point")
    edges = np.linspace(0.0, 1.0, panels + 1)
    parts = [gauss_legendre(n, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _cut_times(t_range: Tuple[float, float], x_range: Tuple[float, float],
               slopes: Sequence[float]) -> List[float]:
    """Times at which a cut line x = s t enters or leaves the x-interval."""
    t_lo, t_hi = t_range
    times = {t_lo, t_hi}
    if t_lo < 0.0 < t_hi:
        times.add(0.0)
    for s in slopes:
        if s == 0.0:
            continue
        times.update(b / s for b in x_range if t_lo < b / s < t_hi)
    return sorted(times)


def integrate_piecewise(integrand, t_range: Tuple[float, float], x_range: Tuple[float, float],
                        slopes: Sequence[float], n: int, panels: int = QUAD_PANELS) -> float:
    """Composite tensor Gauss-Legendre over a rectangle cut along the lines x = s t.

    The time interval is split wherever a cut line crosses the top or bottom
    edge of the rectangle, so on each time slab the same lines cut the
    x-interval into trapezoids. Every trapezoid is mapped onto the unit
    square and integrated with ``panels`` panels of n points per axis.
    ``integrand`` is evaluated on whole 2-D node arrays.
    """
    nodes, weights = composite_rule(n, panels)
    slopes = sorted({float(s) for s in slopes})
    x_lo, x_hi = x_range
    times = _cut_times(t_range, x_range, slopes)
    total = 0.0
    for ta, tb in zip(times[:-1], times[1:]):
        if tb <= ta:
            continue
        mid = 0.5 * (ta + tb)
        inside = sorted((s for s in slopes if x_lo < s * mid < x_hi), key=lambda s: s * mid)
        t = ta + (tb - ta) * nodes
        t_weights = (tb - ta) * weights
        edges = [np.full_like(t, x_lo)] + [s * t for s in inside] + [np.full_like(t, x_hi)]
        for lo, hi in zip(edges[:-1], edges[1:]):
            width = hi - lo
            x = lo[:, None] + width[:, None] * nodes[None, :]
            tt = np.repeat(t[:, None], nodes.size, axis=1)
            values = np.asarray(integrand(tt, x), dtype=float)
            total += float(t_weights @ (width * (values @ weights)))
    return total


def quadrature_inner_product(f, g, quad_points_per_axis: int = 64) -> float:
    """Independent quadrature value of (f, g) over the whole domain."""
    if quad_points_per_axis < 1:
        raise InvalidParameterError("quadrature needs at least one point per axis")
    slopes = tuple(f.cut_slopes) + tuple(g.cut_slopes)
    return integrate_piecewise(
        lambda t, x: np.asarray(f.evaluate(t, x)) * np.asarray(g.evaluate(t, x)),
        (T_MIN, T_MAX), (X_MIN, X_MAX), slopes, quad_points_per_axis,
    )


# Test functions

def _bump(s: np.ndarray) -> np.ndarray:
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        value = np.exp(1.0 - 1.0 / q)
    return np.where(inside, value, 0.0)


def _bump_second_derivative(s: np.ndarray) -> np.ndarray:
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        value = np.exp(1.0 - 1.0 / q)
        g1 = -2.0 * s / q ** 2
        g2 = -2.0 / q ** 2 - 8.0 * s * s / q ** 3
        curvature = (g2 + g1 * g1) * value
    return np.where(inside & (value > 0.0), curvature, 0.0)


class BumpTestFunction(BaseModel):
    """Product of exp(1 - 1/(1 - s^2)) profiles, peak value ``amplitude``."""

    model_config = ConfigDict(frozen=True)

    center: SpaceTimePoint
    radius_t: float = Field(gt=0.0)
    radius_x: float = Field(gt=0.0)
    amplitude: float = 1.0

    @property
    def t_range(self) -> Tuple[float, float]:
        return (self.center.t - self.radius_t, self.center.t + self.radius_t)

    @property
    def x_range(self) -> Tuple[float, float]:
        return (self.center.x - self.radius_x, self.center.x + self.radius_x)

    def is_interior(self) -> bool:
        t_lo, t_hi = self.t_range
        x_lo, x_hi = self.x_range
        return T_MIN < t_lo and t_hi < T_MAX and X_MIN < x_lo and x_hi < X_MAX

    def _scaled(self, t: ArrayLike, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        st = (np.asarray(t, dtype=float) - self.center.t) / self.radius_t
        sx = (np.asarray(x, dtype=float) - self.center.x) / self.radius_x
        return st, sx

    def value(self, t: ArrayLike, x: ArrayLike) -> np.ndarray:
        st, sx = self._scaled(t, x)
        return self.amplitude * _bump(st) * _bump(sx)

    def d_tt(self, t: ArrayLike, x: ArrayLike) -> np.ndarray:
        st, sx = self._scaled(t, x)
        return self.amplitude * _bump_second_derivative(st) * _bump(sx) / self.radius_t ** 2

    def d_xx(self, t: ArrayLike, x: ArrayLike) -> np.ndarray:
        st, sx = self._scaled(t, x)
        return self.amplitude * _bump(st) * _bump_second_derivative(sx) / self.radius_x ** 2

    def wave_operator(self, t: ArrayLike, x: ArrayLike, mu: float) -> np.ndarray:
        return self.d_tt(t, x) - mu * mu * self.d_xx(t, x)


def random_interior_bump(rng: np.random.Generator, min_radius: float = 0.1,
                         max_radius: float = 0.25, margin: float = 1e-3) -> BumpTestFunction:
    """Draw a bump whose support lies strictly inside the domain with t > 0."""
    radius_t = rng.uniform(min_radius, min(max_radius, 0.5 - margin))
    radius_x = rng.uniform(min_radius, max_radius)
    center_t = rng.uniform(T_MIN + radius_t + margin, T_MAX - radius_t - margin)
    center_x = rng.uniform(X_MIN + radius_x + margin, X_MAX - radius_x - margin)
    return BumpTestFunction(
        center=SpaceTimePoint(t=center_t, x=center_x), radius_t=radius_t, radius_x=radius_x,
    )


def weak_residual(f, phi: BumpTestFunction, mu: float, quad_points_per_axis: int = 64) -> float:
    """Quadrature value of the integral of f * (phi_tt - mu^2 phi_xx).

    ``f`` is anything with ``evaluate(t, x)`` and ``cut_slopes``; the
    bounding box of the test function is cut along those slopes.
    """
    mu = _check_parameter(mu)
    if quad_points_per_axis < MIN_QUAD_POINTS:
        raise InvalidParameterError(
            f"quadrature order {quad_points_per_axis} below the minimum of {MIN_QUAD_POINTS}"
        )
    if not phi.is_interior():
        raise DomainError("test-function support must lie strictly inside the domain with t > 0")
    if phi.amplitude == 0.0:
        return 0.0

    def integrand(t, x):
        return np.asarray(f.evaluate(t, x)) * phi.wave_operator(t, x, mu)

    return integrate_piecewise(integrand, phi.t_range, phi.x_range, f.cut_slopes, quad_points_per_axis)
