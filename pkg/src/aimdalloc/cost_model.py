"""Private convex cost functions built from nonnegative monomials.

A cost is ``f(x) = sum_t c_t * prod_j (x^j)^{e_tj}`` over ``m`` resources.
Every term has a nonnegative coefficient and at least one positive
exponent, so ``f(0) = 0`` and ``f`` is nondecreasing on the nonnegative
orthant. The camera family used in the experiments is a special case
(univariate terms only); cross-resource products are representable too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import check_points, check_vector
from .exceptions import ConfigError, DimensionError

PSD_TOLERANCE = -1e-8


def _power_table(x: np.ndarray, max_exp: int) -> np.ndarray:
    """Stack ``x**0 .. x**max_exp`` computed by repeated multiplication.

    Plain multiplication keeps results bit-identical no matter how the
    points are batched, which the simulator relies on.
    """
    table = np.empty((max_exp + 1,) + x.shape)
    table[0] = 1.0
    for p in range(1, max_exp + 1):
        table[p] = table[p - 1] * x
    return table


def _term_partials(coefs: np.ndarray, exps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-term partial derivatives.

    ``x`` has shape (..., m); returns shape (..., T, m) where entry
    ``[..., t, j]`` is d/dx^j of term ``t``.
    """
    T, m = exps.shape
    max_exp = int(exps.max()) if exps.size else 0
    table = _power_table(x, max_exp)                       # (E+1, ..., m)
    lead = x.shape[:-1]
    cols = np.arange(m)
    # powers[..., t, l] = x[..., l] ** exps[t, l]
    powers = np.moveaxis(table[exps, ..., cols], (0, 1), (-2, -1)) if lead else table[exps, cols]
    lowered = table[np.maximum(exps - 1, 0), ..., cols]
    lowered = np.moveaxis(lowered, (0, 1), (-2, -1)) if lead else lowered
    deriv = np.where(exps > 0, exps * lowered, 0.0)
    out = np.empty(lead + (T, m))
    for j in range(m):
        cof = np.ones(lead + (T,))
        for l in range(m):
            if l != j:
                cof = cof * powers[..., l]
        out[..., j] = coefs * deriv[..., j] * cof
    return out


@dataclass(frozen=True)
class MonomialTerm:
    """``coefficient * prod_j (x^j)^{exponents[j]}``."""

    coefficient: float
    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefficient", float(self.coefficient))
        if not self.coefficient >= 0:
            raise ConfigError(f"coefficient must be >= 0, got {self.coefficient}")
        if any(e < 0 for e in exps):
            raise ConfigError(f"exponents must be nonnegative integers, got {exps}")
        if sum(exps) < 1:
            raise ConfigError("constant terms are not allowed (sum of exponents must be >= 1)")

    @property
    def is_univariate(self) -> bool:
        return sum(1 for e in self.exponents if e) == 1


@dataclass(frozen=True)
class CostFunction:
    """Immutable sum of monomial terms over ``resource_count`` resources."""

    terms: tuple[MonomialTerm, ...]
    resource_count: int
    tag: str = ""
    _coefs: np.ndarray = field(init=False, repr=False, compare=False)
    _exps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        m = int(self.resource_count)
        if m < 1:
            raise ConfigError("resource_count must be >= 1")
        for t in terms:
            if len(t.exponents) != m:
                raise DimensionError(m, len(t.exponents), "term exponent vector")
        coefs = np.array([t.coefficient for t in terms], dtype=float)
        exps = np.array([t.exponents for t in terms], dtype=np.intp).reshape(len(terms), m)
        coefs.setflags(write=False)
        exps.setflags(write=False)
        object.__setattr__(self, "_coefs", coefs)
        object.__setattr__(self, "_exps", exps)

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[float, Sequence[int]]], tag: str = "") -> "CostFunction":
        """Build from ``[(coefficient, exponents), ...]``."""
        mono = tuple(MonomialTerm(c, tuple(e)) for c, e in terms)
        if not mono:
            raise ConfigError("a cost function needs at least one term")
        return cls(mono, len(mono[0].exponents), tag)

    def evaluate(self, x) -> float | np.ndarray:
        """Cost at ``x`` (shape (m,)) or at each row of a batch (N, m)."""
        pts = check_points(x, self.resource_count)
        if np.any(pts < 0):
            raise ValueError("allocation must be nonnegative")
        if not self.terms:
            return 0.0 if pts.ndim == 1 else np.zeros(pts.shape[0])
        table = _power_table(pts, int(self._exps.max()))
        cols = np.arange(self.resource_count)
        if pts.ndim == 1:
            monos = np.prod(table[self._exps, cols], axis=-1)
            return float(monos @ self._coefs)
        powers = np.moveaxis(table[self._exps, :, cols], 2, 0)   # (N, T, m)
        return np.prod(powers, axis=-1) @ self._coefs

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient; accepts a point (m,) or a batch (N, m).

        Terms are accumulated one at a time, in order, so that the result
        matches the vectorized population gradient bit for bit.
        """
        pts = check_points(x, self.resource_count)
        out = np.zeros(pts.shape)
        if not self.terms:
            return out
        parts = _term_partials(self._coefs, self._exps, pts)
        for t in range(len(self.terms)):
            out = out + parts[..., t, :]
        return out

    @property
    def is_separable(self) -> bool:
        return all(t.is_univariate for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "terms": [{"coefficient": t.coefficient, "exponents": list(t.exponents)}
                      for t in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict, resource_count: int | None = None) -> "CostFunction":
        terms = tuple(MonomialTerm(t["coefficient"], tuple(t["exponents"])) for t in data["terms"])
        if resource_count is None:
            if not terms:
                raise ConfigError("cannot infer resource_count from an empty term list")
            resource_count = len(terms[0].exponents)
        return cls(terms, resource_count, data.get("tag", ""))


# functional aliases, handy when mapping over populations
def evaluate(f: CostFunction, x) -> float:
    return f.evaluate(x)


def gradient(f: CostFunction, x) -> np.ndarray:
    return f.gradient(x)


def finite_diff_gradient(f: CostFunction, x, h: float = 1e-6) -> np.ndarray:
    """Numerical gradient treating ``f`` as a black box.

    Central differences where ``x^j >= h``, forward differences closer to
    the boundary of the orthant (``f`` is undefined for negative input).
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = check_vector(x, f.resource_count, nonnegative=True)
    g = np.empty_like(x)
    for j in range(x.size):
        up = x.copy()
        up[j] += h
        if x[j] >= h:
            down = x.copy()
            down[j] -= h
            g[j] = (f.evaluate(up) - f.evaluate(down)) / (2 * h)
        else:
            g[j] = (f.evaluate(up) - f.evaluate(x)) / h
    return g


def finite_diff_hessian(f: CostFunction, points: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Symmetrized central-difference Hessian of the analytic gradient.

    ``points`` is (N, m); ``h`` holds one step per resource and must be
    smaller than every coordinate of every point.
    """
    N, m = points.shape
    H = np.empty((N, m, m))
    for l in range(m):
        step = np.zeros(m)
        step[l] = h[l]
        H[:, :, l] = (f.gradient(points + step) - f.gradient(points - step)) / (2 * h[l])
    return 0.5 * (H + np.swapaxes(H, 1, 2))


@dataclass(frozen=True)
class MembershipReport:
    """Outcome of a sampled membership test.

    ``worst_margin`` is the smallest of ``x^j - delta_j grad_j f(x)`` and
    ``delta_j grad_j f(x)`` over the grid, lowered further to the smallest
    Hessian eigenvalue when the PSD check fails.
    """

    holds: bool
    worst_point: np.ndarray
    worst_margin: float
    worst_resource: int
    min_hessian_eigenvalue: float

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_point": [float(v) for v in self.worst_point],
            "worst_margin": self.worst_margin,
            "worst_resource": self.worst_resource,
            "min_hessian_eigenvalue": self.min_hessian_eigenvalue,
        }


def membership_grid(box_upper, grid_points_per_axis: int) -> np.ndarray:
    """Tensor grid over ``(0, box_upper]``; zero itself is excluded."""
    axes = [np.linspace(u / grid_points_per_axis, u, grid_points_per_axis) for u in box_upper]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def check_membership(f: CostFunction, delta, box_upper, grid_points_per_axis: int = 20) -> MembershipReport:
    """Sampled test of ``0 < delta_j grad_j f(x) < x^j`` plus Hessian PSD on a box."""
    m = f.resource_count
    delta = check_vector(delta, m, name="delta")
    box_upper = check_vector(box_upper, m, name="box_upper")
    if np.any(delta <= 0):
        raise ValueError("delta must be positive")
    if np.any(box_upper <= 0):
        raise ValueError("box_upper must be positive")
    if grid_points_per_axis < 2:
        raise ValueError("grid_points_per_axis must be >= 2")

    pts = membership_grid(box_upper, grid_points_per_axis)
    scaled = delta * f.gradient(pts)
    margins = np.minimum(pts - scaled, scaled)           # (N, m)
    flat = int(np.argmin(margins))
    row, col = divmod(flat, m)
    worst = float(margins[row, col])

    # step well below the smallest grid coordinate so central differences stay inside the orthant
    h = 1e-5 * box_upper / grid_points_per_axis
    eig = np.linalg.eigvalsh(finite_diff_hessian(f, pts, h))[:, 0]
    min_eig = float(eig.min())
    if min_eig < PSD_TOLERANCE and min_eig < worst:
        row = int(np.argmin(eig))
        col = -1
        worst = min_eig
    return MembershipReport(
        holds=bool(worst > 0 and min_eig >= PSD_TOLERANCE),
        worst_point=pts[row].copy(),
        worst_margin=worst,
        worst_resource=col,
        min_hessian_eigenvalue=min_eig,
    )


@dataclass(frozen=True)
class CameraCostRanges:
    """Inclusive integer ranges for the camera cost coefficients."""

    a: tuple[int, int] = (10, 20)
    b: tuple[int, int] = (25, 35)
    c: tuple[int, int] = (22, 32)
    d: tuple[int, int] = (1, 5)

    def __post_init__(self):
        errors = []
        for name in ("a", "b", "c", "d"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (int(lo), int(hi)))
            if lo > hi:
                errors.append(f"ranges.{name}: empty interval [{lo}, {hi}]")
            if lo < 0:
                errors.append(f"ranges.{name}: coefficients must be nonnegative")
        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k)) for k in ("a", "b", "c", "d")}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraCostRanges":
        return cls(**{k: tuple(v) for k, v in data.items()})


CAMERA_BRANCH_TAGS = ("camera/branch1", "camera/branch2", "camera/branch3")


def camera_cost(branch: int, a: float, b: float, c: float, d: float) -> CostFunction:
    """One of the three camera cost shapes over (memory, storage, bandwidth)."""
    def mono(coef, j, e):
        exps = [0, 0, 0]
        exps[j] = e
        return (coef, exps)

    if branch == 1:
        terms = [mono(a, 0, 2), mono(c, 2, 2), mono(a / 2, 0, 4), mono(2 * b, 1, 4),
                 mono(b / 2, 1, 6), mono(c / 4, 2, 4), mono(d / 8, 2, 8)]
    elif branch == 2:
        terms = [mono(a, 0, 2), mono(b, 1, 2), mono(b / 2, 1, 4), mono(3 * c / 2, 2, 4)]
    elif branch == 3:
        terms = [mono(b, 1, 2), mono(c, 2, 2), mono(a / 3, 0, 6), mono(d / 6, 1, 6),
                 mono(d / 8, 2, 4)]
    else:
        raise ValueError(f"branch must be 1, 2 or 3, got {branch}")
    return CostFunction.from_terms(terms, tag=CAMERA_BRANCH_TAGS[branch - 1])


def sample_paper_cost(rng: np.random.Generator, ranges: CameraCostRanges | None = None) -> CostFunction:
    """Draw a camera cost: branch uniformly from {1,2,3}, then a, b, c, d."""
    ranges = ranges or CameraCostRanges()
    branch = int(rng.integers(1, 4))
    a, b, c, d = (int(rng.integers(lo, hi + 1)) for lo, hi in (ranges.a, ranges.b, ranges.c, ranges.d))
    return camera_cost(branch, a, b, c, d)


class StackedCosts:
    """Population of cost functions flattened into one term table.

    Used by the simulator to evaluate every agent's gradient in a handful
    of array operations. Results match ``CostFunction.gradient`` exactly.
    """

    def __init__(self, costs: Sequence[CostFunction]):
        costs = list(costs)
        self.costs = costs
        self.n = len(costs)
        self.m = costs[0].resource_count
        owners, coefs, exps = [], [], []
        for i, f in enumerate(costs):
            owners.extend([i] * len(f.terms))
            coefs.append(f._coefs)
            exps.append(f._exps)
        self.owner = np.asarray(owners, dtype=np.intp)
        self.coefs = np.concatenate(coefs) if coefs else np.zeros(0)
        self.exps = np.concatenate(exps).reshape(-1, self.m) if exps else np.zeros((0, self.m), np.intp)
        self.max_exp = int(self.exps.max()) if self.exps.size else 0
        self.univariate = bool(np.all((self.exps > 0).sum(axis=1) == 1))
        if self.univariate:
            self._res = np.argmax(self.exps > 0, axis=1)
            self._e = self.exps[np.arange(len(self.exps)), self._res]
            self._flat = self.owner * self.m + self._res
            self._lower = (self._e - 1) * (self.n * self.m) + self._flat

    def gradient(self, xbar: np.ndarray) -> np.ndarray:
        """Gradients of all agents, ``xbar`` of shape (n, m)."""
        nm = self.n * self.m
        if self.univariate:
            table = _power_table(xbar.ravel(), self.max_exp).ravel()
            vals = self.coefs * (self._e * table[self._lower])
            return np.bincount(self._flat, vals, minlength=nm).reshape(self.n, self.m)
        return np.array([f.gradient(row) for f, row in zip(self.costs, xbar)])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Per-agent costs at allocation matrix ``x`` (n, m)."""
        rows = x[self.owner]
        table = _power_table(rows, self.max_exp)
        cols = np.arange(self.m)
        monos = np.prod(table[self.exps, np.arange(len(self.owner))[:, None], cols], axis=-1)
        return np.bincount(self.owner, self.coefs * monos, minlength=self.n)

    def difference(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-agent ``f_i(y_i) - f_i(x_i)`` without cancellation.

        Each monomial difference telescopes over resources, and each power
        difference uses ``b^e - a^e = (b - a) * sum_k b^k a^(e-1-k)``, so
        the result stays accurate even when it is far below ``eps * f``.
        """
        T = len(self.owner)
        rows = np.arange(T)[:, None]
        cols = np.arange(self.m)
        a, b = x[self.owner], y[self.owner]
        pa, pb = _power_table(a, self.max_exp), _power_table(b, self.max_exp)
        xp = pa[self.exps, rows, cols]                       # (T, m) powers at x
        yp = pb[self.exps, rows, cols]                       # (T, m) powers at y
        # sum_{k<e} b^k a^(e-1-k) for every (term, resource)
        geo = np.zeros((T, self.m))
        for k in range(self.max_exp):
            lower = self.exps - 1 - k
            use = lower >= 0
            geo += np.where(use, pb[k] * pa[np.maximum(lower, 0), rows, cols], 0.0)
        step = (b - a) * geo
        total = np.zeros(T)
        for l in range(self.m):
            left = np.prod(yp[:, :l], axis=1)
            right = np.prod(xp[:, l + 1:], axis=1)
            total += left * step[:, l] * right
        return np.bincount(self.owner, self.coefs * total, minlength=self.n)
