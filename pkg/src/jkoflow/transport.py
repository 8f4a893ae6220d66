"""Multi-marginal couplings of particle densities.

The workhorse is the co-monotone plan: with a shared particle count the
coupling that matches the j-th smallest particles of every marginal.  For
costs whose mixed second derivatives are nonpositive (``comonotone_certified``)
this plan is optimal, so coupling values on the hot path are plain index-wise
sums.  A brute-force LP over the full product grid is kept as a correctness
oracle, and Kantorovich potentials / velocity fields give the dual side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import CapacityError, DomainError, InvalidInputError, NumericalFailureError
from .geometry import Domain, ParticleDensity, w2_distance

LP_SCALE_CAP = 1_000_000  # on l * prod(K_i); the LP is an oracle, not a solver

COMONOTONE = "comonotone"
SPARSE = "sparse"


@dataclass(frozen=True)
class CostFunction:
    """Cost c(x_1, ..., x_l) with vectorized evaluation and partials.

    ``fn`` maps arrays of shape (..., arity) to shape (...); ``partial_fns[i]``
    gives dc/dx_i with the same convention.  ``partial_bound`` must dominate
    every |dc/dx_i| on the domain the cost is used with.  Set
    ``comonotone_certified`` only when d2c/dx_i dx_j <= 0 for all i != j.
    """

    arity: int
    fn: Callable[[np.ndarray], np.ndarray]
    partial_fns: tuple[Callable[[np.ndarray], np.ndarray], ...]
    partial_bound: float
    comonotone_certified: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.arity < 2:
            raise InvalidInputError("costs must couple at least two populations")
        if len(self.partial_fns) != self.arity:
            raise InvalidInputError("need one partial per coordinate")
        if not (math.isfinite(self.partial_bound) and self.partial_bound >= 0):
            raise InvalidInputError("partial_bound must be finite and nonnegative")

    def evaluate(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.shape[-1] != self.arity:
            raise InvalidInputError(f"expected trailing axis of size {self.arity}")
        return np.asarray(self.fn(xs), dtype=float)

    def partial(self, i: int, xs: np.ndarray) -> np.ndarray:
        if not 0 <= i < self.arity:
            raise InvalidInputError(f"coordinate {i} out of range for arity {self.arity}")
        xs = np.asarray(xs, dtype=float)
        if xs.shape[-1] != self.arity:
            raise InvalidInputError(f"expected trailing axis of size {self.arity}")
        return np.asarray(self.partial_fns[i](xs), dtype=float)


def zero_cost(arity: int = 2) -> CostFunction:
    def fn(xs):
        return np.zeros(xs.shape[:-1])

    partials = tuple(lambda xs: np.zeros(xs.shape[:-1]) for _ in range(arity))
    return CostFunction(arity, fn, partials, 0.0, comonotone_certified=True, name="zero")


def quadratic_pairwise_cost(domain: Domain) -> CostFunction:
    """c(x, y) = (x - y)^2; mixed second derivative -2, so certified."""

    def fn(xs):
        d = xs[..., 0] - xs[..., 1]
        return d * d

    partials = (
        lambda xs: 2.0 * (xs[..., 0] - xs[..., 1]),
        lambda xs: -2.0 * (xs[..., 0] - xs[..., 1]),
    )
    return CostFunction(
        2, fn, partials, 2.0 * domain.length, comonotone_certified=True,
        name="quadratic_pairwise",
    )


def barycenter_cost(
    weights: Sequence[float], domain: Domain, anchor: int = 0
) -> CostFunction:
    """c(x) = sum_k w_k (x_anchor - x_k)^2 over the non-anchor coordinates.

    With anchor 0 and weights (alpha, beta) this is the three-way attraction
    alpha |x1 - x2|^2 + beta |x1 - x3|^2.  Mixed partials are -2 w_k <= 0.
    """
    w = np.asarray(list(weights), dtype=float)
    if w.size < 1 or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("barycenter weights must be positive reals")
    arity = w.size + 1
    if not 0 <= anchor < arity:
        raise InvalidInputError(f"anchor {anchor} out of range for arity {arity}")
    others = np.array([k for k in range(arity) if k != anchor])

    def fn(xs):
        d = xs[..., others] - xs[..., anchor, None]
        return np.sum(w * d * d, axis=-1)

    def make_partial(i):
        if i == anchor:
            return lambda xs: -2.0 * np.sum(
                w * (xs[..., others] - xs[..., anchor, None]), axis=-1
            )
        k = int(np.where(others == i)[0][0])
        return lambda xs: 2.0 * w[k] * (xs[..., i] - xs[..., anchor])

    partials = tuple(make_partial(i) for i in range(arity))
    bound = 2.0 * domain.length * float(np.sum(w))
    return CostFunction(
        arity, fn, partials, bound, comonotone_certified=True, name="barycenter"
    )


@dataclass(frozen=True)
class ComonotoneReport:
    passed: bool
    worst_quotient: float
    n_probes: int


def probe_comonotone(
    cost: CostFunction,
    domain: Domain,
    n_probes: int = 10_000,
    tol: float = 1e-10,
    seed: int = 0,
) -> tuple[CostFunction, ComonotoneReport]:
    """Sample mixed second differences; downgrade the certificate on failure.

    The probe never upgrades: passing is only evidence, so an uncertified
    cost stays uncertified.  Step size 1e-2 of the domain length keeps the
    difference quotient rounding below the tolerance for O(1) costs.
    """
    rng = np.random.default_rng(seed)
    h = 1e-2 * domain.length
    x = rng.uniform(domain.lower, domain.upper - 2 * h, size=(n_probes, cost.arity))
    worst = -math.inf
    for i in range(cost.arity):
        for j in range(i + 1, cost.arity):
            xi = x.copy()
            xi[:, i] += h
            xj = x.copy()
            xj[:, j] += h
            xij = xi.copy()
            xij[:, j] += h
            quot = (cost.evaluate(xij) - cost.evaluate(xi) - cost.evaluate(xj) + cost.evaluate(x)) / (h * h)
            worst = max(worst, float(np.max(quot)))
    passed = worst <= tol
    out = cost if passed or not cost.comonotone_certified else replace(cost, comonotone_certified=False)
    return out, ComonotoneReport(passed, worst, n_probes)


@dataclass(frozen=True, eq=False)
class MultiMarginalPlan:
    """Discrete coupling of l particle densities.

    Support rows index into each marginal's atoms; weights are the coupled
    masses.  ``cost_value`` is filled by whichever routine built the plan
    with a cost at hand (None otherwise) and is always recomputable with
    ``plan_cost``.
    """

    form: str
    marginals: tuple[ParticleDensity, ...]
    indices: np.ndarray  # (n_support, l) integer
    weights: np.ndarray  # (n_support,)
    cost_value: float | None = None

    def __post_init__(self):
        if self.form not in (COMONOTONE, SPARSE):
            raise InvalidInputError(f"unknown plan form {self.form!r}")
        idx = np.asarray(self.indices)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        if idx.ndim != 2 or idx.shape[1] != len(self.marginals) or idx.shape[0] != w.size:
            raise InvalidInputError("inconsistent plan support shapes")
        if np.any(w < -1e-15):
            raise InvalidInputError("plan weights must be nonnegative")

    @property
    def arity(self) -> int:
        return len(self.marginals)

    def support_positions(self) -> np.ndarray:
        """(n_support, l) matrix of coupled atom positions."""
        cols = [m.positions[self.indices[:, i]] for i, m in enumerate(self.marginals)]
        return np.stack(cols, axis=-1)

    def marginal_weights(self, i: int) -> np.ndarray:
        """Pushforward of the plan onto coordinate i, as weights per atom."""
        if not 0 <= i < self.arity:
            raise InvalidInputError(f"marginal index {i} out of range")
        return np.bincount(
            self.indices[:, i], weights=self.weights, minlength=self.marginals[i].n
        )


def plan_cost(plan: MultiMarginalPlan, cost: CostFunction) -> float:
    if cost.arity != plan.arity:
        raise InvalidInputError("cost arity does not match plan arity")
    return float(np.sum(plan.weights * cost.evaluate(plan.support_positions())))


def monotone_plan(
    marginals: Sequence[ParticleDensity], cost: CostFunction | None = None
) -> MultiMarginalPlan:
    """Index-diagonal coupling of the j-th smallest atoms of every marginal.

    Exact optimizer for certified-comonotone costs.  All marginals must share
    one particle count and domain; atom j carries weight 1/N.
    """
    marginals = tuple(marginals)
    if len(marginals) < 2:
        raise InvalidInputError("need at least two marginals")
    n = marginals[0].n
    dom = marginals[0].domain
    for m in marginals[1:]:
        if m.n != n:
            raise InvalidInputError(f"marginal particle counts differ: {m.n} vs {n}")
        if m.domain != dom:
            raise InvalidInputError("marginals live on different domains")
    idx = np.tile(np.arange(n)[:, None], (1, len(marginals)))
    weights = np.full(n, 1.0 / n)
    plan = MultiMarginalPlan(COMONOTONE, marginals, idx, weights)
    if cost is not None:
        plan = replace(plan, cost_value=plan_cost(plan, cost))
    return plan


def _product_scale(marginals) -> int:
    size = 1
    for m in marginals:
        size *= m.n
    return size


def lp_solve_mm(
    marginals: Sequence[ParticleDensity], cost: CostFunction
) -> MultiMarginalPlan:
    """Exact multi-marginal optimum by exhaustive LP over the product grid.

    Oracle only: refuses instances with l * prod(K_i) beyond LP_SCALE_CAP.
    Optimality is certified from the returned equality duals (reduced costs
    >= -1e-8 and duality gap <= 1e-8); the support weights are then
    re-solved on the marginal constraints so each pushforward matches its
    marginal to machine precision.
    """
    marginals = tuple(marginals)
    l = len(marginals)
    if l != cost.arity:
        raise InvalidInputError("cost arity does not match marginal count")
    size = _product_scale(marginals)
    if l * size > LP_SCALE_CAP:
        raise CapacityError(
            f"LP scale l*prod(K)={l * size} exceeds cap {LP_SCALE_CAP}"
        )
    ks = [m.n for m in marginals]
    tuple_idx = np.indices(ks).reshape(l, size)
    pts = np.stack(
        [m.positions[tuple_idx[i]] for i, m in enumerate(marginals)], axis=-1
    )
    c = cost.evaluate(pts)

    rows = []
    offset = 0
    for i in range(l):
        rows.append(offset + tuple_idx[i])
        offset += ks[i]
    row = np.concatenate(rows)
    col = np.tile(np.arange(size), l)
    a_eq = sparse.coo_matrix((np.ones(l * size), (row, col)), shape=(offset, size))
    b_eq = np.concatenate([np.full(k, 1.0 / k) for k in ks])

    res = linprog(c, A_eq=a_eq.tocsr(), b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise NumericalFailureError(f"oracle LP failed: {res.message}")
    duals = res.eqlin.marginals
    reduced = c - a_eq.T @ duals
    if float(np.min(reduced)) < -1e-8:
        raise NumericalFailureError(
            "oracle LP duals infeasible", residual=float(-np.min(reduced))
        )
    gap = abs(float(res.fun) - float(b_eq @ duals))
    if gap > 1e-8:
        raise NumericalFailureError("oracle LP duality gap too large", residual=gap)

    keep = res.x > 1e-10
    support = tuple_idx[:, keep].T
    # polish: re-solve the weights on the fixed support so every marginal
    # is recovered exactly instead of to the LP feasibility tolerance
    a_sup = a_eq.tocsc()[:, keep].toarray()
    w, *_ = np.linalg.lstsq(a_sup, b_eq, rcond=None)
    if np.any(w < -1e-9) or float(np.max(np.abs(a_sup @ w - b_eq))) > 1e-12:
        w = res.x[keep]  # polish failed; fall back to raw LP weights
    w = np.maximum(w, 0.0)
    value = float(np.dot(w, c[keep]))
    return MultiMarginalPlan(SPARSE, marginals, support, w, cost_value=value)


def _chain_potentials(plan: MultiMarginalPlan, cost: CostFunction) -> list[np.ndarray]:
    """Duals tight on every support tuple, built by telescoping along ranks.

    Walking the support rows in order of the first coordinate, the increment
    of u_i is the cost change of raising slot i alone (slots before it
    already raised).  Tightness on the support holds by construction;
    feasibility off it follows from nonpositive mixed second derivatives
    (the Monge inequality, telescoped one coordinate at a time).
    """
    l = plan.arity
    rows = plan.support_positions()
    idx = plan.indices
    order = np.argsort(rows[:, 0], kind="stable")
    rows = rows[order]
    idx = idx[order]
    n = rows.shape[0]
    u = [np.full(m.n, np.inf) for m in plan.marginals]
    c0 = float(cost.evaluate(rows[0]))
    u[0][idx[0, 0]] = c0  # tightness on the first row pins the constant
    for i in range(1, l):
        u[i][idx[0, i]] = 0.0
    if n > 1:
        lo = rows[:-1]
        increments = np.empty((n - 1, l))
        mixed = lo.copy()
        base = cost.evaluate(mixed)
        for i in range(l):
            mixed[:, i] = rows[1:, i]
            lifted = cost.evaluate(mixed)
            increments[:, i] = lifted - base
            base = lifted
    vals = np.zeros(l)
    vals[0] = c0
    for r in range(1, n):
        vals = vals + increments[r - 1]
        for i in range(l):
            a = idx[r, i]
            if np.isinf(u[i][a]):
                u[i][a] = vals[i]
            else:
                vals[i] = u[i][a]  # revisited atom: keep the first value
    for i in range(l):
        np.nan_to_num(u[i], copy=False, posinf=0.0)
    return u


def kantorovich_potentials(
    plan: MultiMarginalPlan,
    cost: CostFunction,
    gap_tol: float = 1e-10,
    max_sweeps: int = 10_000,
) -> list[np.ndarray]:
    """Dual potentials on each marginal's atoms for an optimal plan.

    Initialized from chain potentials along the plan support, then polished
    by alternating c-conjugate updates over the full product tensor:
    u_i(a) = min over the other coordinates of [c - sum_{j!=i} u_j], swept
    until the duality gap against the plan's cost closes below gap_tol.
    Gauge: every potential except the first vanishes at its first atom.
    """
    l = plan.arity
    if cost.arity != l:
        raise InvalidInputError("cost arity does not match plan arity")
    size = _product_scale(plan.marginals)
    if l * size > LP_SCALE_CAP:
        raise CapacityError(f"potential tensor l*prod(K)={l * size} exceeds cap")
    ks = [m.n for m in plan.marginals]
    tuple_idx = np.indices(ks).reshape(l, size)
    pts = np.stack(
        [m.positions[tuple_idx[i]] for i, m in enumerate(plan.marginals)], axis=-1
    )
    c_tensor = cost.evaluate(pts).reshape(ks)
    primal = plan_cost(plan, cost)
    marg_w = [np.full(k, 1.0 / k) for k in ks]

    def conjugate(u, i):
        total = c_tensor.copy()
        for j in range(l):
            if j != i:
                shape = [1] * l
                shape[j] = ks[j]
                total = total - u[j].reshape(shape)
        axes = tuple(j for j in range(l) if j != i)
        return total.min(axis=axes)

    def alternate(u, first_order, budget):
        gap = math.inf
        for sweep in range(budget):
            changed = False
            for i in first_order if sweep == 0 else range(l):
                new = conjugate(u, i)
                changed = changed or not np.array_equal(new, u[i])
                u[i] = new
            dual = sum(float(np.dot(u[i], marg_w[i])) for i in range(l))
            gap = primal - dual
            if gap <= gap_tol:
                return u, gap, True
            if not changed:
                return u, gap, False  # exact fixed point above tolerance
        return u, gap, False

    # the zeros start converges for symmetric instances and picks the
    # canonical duals there; when it stalls at a suboptimal fixed point,
    # restart from chain potentials, which are already tight on the support
    u = [np.zeros(k) for k in ks]
    u, gap, converged = alternate(u, [l - 1] + list(range(l)), max_sweeps)
    if not converged:
        u, gap, converged = alternate(
            _chain_potentials(plan, cost), list(range(l)), max_sweeps
        )
    if not converged:
        raise NumericalFailureError(
            f"conjugate sweeps stalled at duality gap {gap:.3e}", residual=gap
        )
    for i in range(1, l):
        shift = u[i][0]
        u[i] = u[i] - shift
        u[0] = u[0] + shift
    return u


def velocity_field(plan: MultiMarginalPlan, cost: CostFunction, i: int) -> np.ndarray:
    """Transport velocity on marginal i's atoms: E[dc/dx_i | x_i = atom].

    For the comonotone form this is just the partial at each coupled tuple;
    for sparse plans it is the weight-averaged partial over the tuples that
    share the atom.
    """
    if not 0 <= i < plan.arity:
        raise InvalidInputError(f"marginal index {i} out of range")
    if cost.arity != plan.arity:
        raise InvalidInputError("cost arity does not match plan arity")
    p = cost.partial(i, plan.support_positions())
    if plan.form == COMONOTONE:
        return p
    n = plan.marginals[i].n
    num = np.bincount(plan.indices[:, i], weights=plan.weights * p, minlength=n)
    den = np.bincount(plan.indices[:, i], weights=plan.weights, minlength=n)
    if np.any(den <= 0):
        raise InvalidInputError("plan support misses atoms of the requested marginal")
    return num / den


def displacement_interpolate(
    rho0: ParticleDensity, rho1: ParticleDensity, t: float
) -> ParticleDensity:
    """Constant-speed geodesic between equal-count densities.

    Particle j moves on the straight line (1-t) x_j + t y_j; sortedness and
    the domain box are preserved by convexity.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"interpolation time {t!r} outside [0, 1]")
    if rho0.n != rho1.n:
        raise InvalidInputError("particle counts differ")
    if rho0.domain != rho1.domain:
        raise InvalidInputError("densities live on different domains")
    if t == 0.0:
        return rho0
    if t == 1.0:
        return rho1
    return ParticleDensity(rho0.domain, (1.0 - t) * rho0.positions + t * rho1.positions)


@dataclass(frozen=True)
class ConvexityReport:
    t_samples: tuple[float, ...]
    violations: tuple[float, ...]
    max_violation: float
    endpoint_values: tuple[float, float]
    evaluation: str  # "comonotone" or "lp"
    advisory_only: bool


def _coupling_value(cost: CostFunction, marginals) -> tuple[float, str]:
    if cost.comonotone_certified:
        return plan_cost(monotone_plan(marginals), cost), COMONOTONE
    try:
        return float(lp_solve_mm(marginals, cost).cost_value), "lp"
    except CapacityError:
        # too big for the oracle: fall back to the (upper-bound) diagonal value
        return plan_cost(monotone_plan(marginals), cost), COMONOTONE


def convexity_probe(
    cost: CostFunction,
    endpoints: tuple[Sequence[ParticleDensity], Sequence[ParticleDensity]],
    t_samples: Sequence[float] = (0.25, 0.5, 0.75),
) -> ConvexityReport:
    """Check convexity of the coupling value along displacement interpolation.

    For each t the tuple is interpolated component-wise and the coupling
    value is compared with the chord (1-t) W(a) + t W(b); positive numbers
    are convexity violations.  Certified costs are evaluated through the
    co-monotone plan (exact); uncertified costs go through the LP oracle
    when affordable and the report is flagged advisory-only.
    """
    tuple_a, tuple_b = (tuple(endpoints[0]), tuple(endpoints[1]))
    if len(tuple_a) != cost.arity or len(tuple_b) != cost.arity:
        raise InvalidInputError("endpoint tuples must match the cost arity")
    ts = tuple(float(t) for t in t_samples)
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"t sample {t!r} outside [0, 1]")
    value_a, eval_kind = _coupling_value(cost, tuple_a)
    value_b, _ = _coupling_value(cost, tuple_b)
    violations = []
    for t in ts:
        mid = tuple(
            displacement_interpolate(a, b, t) for a, b in zip(tuple_a, tuple_b)
        )
        v_mid, _ = _coupling_value(cost, mid)
        violations.append(v_mid - ((1.0 - t) * value_a + t * value_b))
    max_v = max(violations) if violations else 0.0
    return ConvexityReport(
        t_samples=ts,
        violations=tuple(violations),
        max_violation=float(max_v),
        endpoint_values=(value_a, value_b),
        evaluation=eval_kind,
        advisory_only=not cost.comonotone_certified,
    )


def semi_coupling_value(
    cost: CostFunction, frozen: Sequence[ParticleDensity], i: int, rho: ParticleDensity
) -> float:
    """Coupling value with rho in slot i and the frozen tuple elsewhere.

    Index-diagonal evaluation: the plan matches quantile ranks across all
    slots, which is optimal for certified costs with a shared N.
    """
    cols = list(frozen)
    cols.insert(i, rho)
    if len(cols) != cost.arity:
        raise InvalidInputError("frozen tuple size does not match cost arity")
    return plan_cost(monotone_plan(cols), cost)
