"""Pathwise descent solver on the slope vector.

Works on nu (nu_1 = mu_1, nu_t = mu_t - mu_{t-1}), where the objective is

    f(nu) = 0.5 * ||y - X nu||^2 + lam * sum_{t=3..n} |nu_t - nu_{t-1}|

with X the cumulative-sum design. The solver follows a penalty continuation:
start from the exact lam = 0 solution (nu = first differences of y) and climb
the lambda ladder, at each level alternating

* a descent cycle: exact 1-d minimization coordinate by coordinate, where the
  1-d profile is a quadratic plus at most two hinge terms at the neighbouring
  slope values;
* a fusion cycle: joint moves of contiguous runs of equal slopes -- re-solving
  an existing run's common value and absorbing a run into its left neighbour
  (suffix sizes growing until the full preceding run is covered).

Two guarded accelerators keep the certificates tight at realistic sizes (plain
cycles converge too slowly once coordinates couple strongly):

* a structure polish that solves the run values exactly for the current fused
  pattern with frozen boundary signs, walking sign collisions (each collision
  merges two runs) -- every accepted step is verified to not increase f;
* a split scan that reads the residual subgradient and attempts a sub-run
  joint move exactly where its unit bound is violated inside a run.

The KKT certificate (kkt module) independently validates every emitted fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LambdaPath, PathEntry, TimeSeries, TrendFit
from .kkt import check_kkt, lambda_max

# Ignore coordinate moves below this relative size: they are floating-point
# jitter and would endlessly fragment fused runs.
DEADBAND = 1e-15

_ACCEPT_SLACK = 1e-12  # relative slack when testing "objective does not increase"


@dataclass
class PathwiseOptions:
    sweep_tol: float = 1e-10
    max_sweeps: int | None = None      # default 10 * n
    continuation_ratio: float = 2.5    # lambda ladder growth for single fits
    continuation_tol: float = 1e-8     # tolerance at intermediate ladder rungs
    continuation_sweeps: int = 30      # sweep cap at intermediate rungs
    kkt_tol: float = 1e-6              # certificate tolerance recorded on paths
    validate: bool = False             # assert objective monotonicity per cycle


@dataclass
class FusedState:
    """Mutable solver state: slope vector, residual, and the implied run partition."""

    y: np.ndarray
    nu: np.ndarray
    resid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.resid is None:
            self.resid = self.y - np.cumsum(self.nu)

    @classmethod
    def interpolation(cls, y) -> "FusedState":
        """Exact lam = 0 state: mu = y."""
        yv = y.y if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
        nu = np.empty_like(yv)
        nu[0] = yv[0]
        nu[1:] = np.diff(yv)
        return cls(y=yv, nu=nu, resid=np.zeros_like(yv))

    def groups(self) -> list[tuple[int, int]]:
        """Maximal runs of exactly equal slope values, as (start, end) inclusive, 0-based."""
        return _runs_of(self.nu)

    def mu(self) -> np.ndarray:
        return np.cumsum(self.nu)


def _runs_of(nu: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    s = 0
    for i in range(1, nu.size):
        if nu[i] != nu[s]:
            runs.append((s, i - 1))
            s = i
    runs.append((s, nu.size - 1))
    return runs


def _pwq_min(w2: float, c: float, lam: float, b1, b2, prefer: float) -> tuple[float, bool]:
    """Minimize 0.5*w2*v^2 - c*v + lam*(|v-b1| + |v-b2|); breakpoints may be None.

    Scans the stationary candidate of each interval (the hinge subgradient is
    constant there); if none lands in its own interval the minimum sits at a
    breakpoint, and exact ties go to ``prefer``.
    """
    bps = [b for b in (b1, b2) if b is not None]
    if not bps:
        return c / w2, True
    bps.sort()
    k = len(bps)
    lo = -np.inf
    for i in range(k + 1):
        hi = bps[i] if i < k else np.inf
        v = (c - lam * (2 * i - k)) / w2
        if (v > lo or i == 0) and v <= hi:
            return v, True
        lo = hi
    if k == 1 or bps[0] == bps[1]:
        return bps[0], False

    def psi(v):
        return 0.5 * w2 * v * v - c * v + lam * (abs(v - bps[0]) + abs(v - bps[1]))

    p0, p1 = psi(bps[0]), psi(bps[1])
    if abs(p0 - p1) <= 1e-15 * (1.0 + abs(p0)):
        return prefer, False
    return (bps[0] if p0 < p1 else bps[1]), False


def descent_update(state: FusedState, k: int, lam: float) -> float | None:
    """Exact single-coordinate minimization at 0-based coordinate k.

    Returns the new value when the coordinate moves, None on no-change. The
    hinge breakpoints are the current neighbouring slopes: none for k = 0,
    only the right one for k = 1 (the first penalized difference is
    nu_3 - nu_2), only the left one for k = n-1.
    """
    nu, r, y = state.nu, state.resid, state.y
    n = nu.size
    if not 0 <= k < n:
        raise IndexError(k)
    w2 = float(n - k)
    c = w2 * nu[k] + float(r[k:].sum())
    b1 = nu[k - 1] if k >= 2 else None
    b2 = nu[k + 1] if (k >= 1 and k + 1 < n) else None
    prefer = nu[k + 1] if k + 1 < n else nu[k]
    v, _ = _pwq_min(w2, c, lam, b1, b2, prefer)
    d = v - nu[k]
    if d == 0.0 or abs(d) <= DEADBAND * (1.0 + abs(v)):
        return None
    nu[k] = v
    r[k:] -= d
    return v


def fusion_update(state: FusedState, k: int, m: int, lam: float) -> tuple[bool, float | None]:
    """Propose nu[k-m..k] = alpha (0-based, 1 <= m <= k) and accept if the joint
    stationary value lands in its hinge interval and the objective does not
    increase. Returns (accepted, alpha)."""
    n = state.nu.size
    if not (1 <= m <= k) or k >= n:
        raise IndexError((k, m))
    acc, rel, alpha = _try_fuse(state.y, state.nu, state.resid, lam, k - m, k)
    return acc, (alpha if acc else None)


def _try_fuse(y, nu, r, lam, s, e):
    """Joint move of coordinates s..e onto one value. Returns (accepted, rel_change, alpha)."""
    n = y.size
    width = e - s + 1
    w = np.minimum(np.arange(1, n - s + 1, dtype=float), float(width))
    seg = nu[s:e + 1]
    cum = np.cumsum(seg)
    cvals = np.empty(n - s)
    cvals[:width] = cum
    cvals[width:] = cum[-1]
    rt = r[s:]
    w2 = float(w @ w)
    c_lin = float(w @ rt) + float(w @ cvals)
    b1 = nu[s - 1] if s >= 2 else None
    b2 = nu[e + 1] if e + 1 < n else None
    prefer = nu[e + 1] if e + 1 < n else nu[e]
    alpha, landed = _pwq_min(w2, c_lin, lam, b1, b2, prefer)
    if not landed:
        return False, 0.0, None
    if np.all(seg == alpha):
        return False, 0.0, alpha
    dmu = alpha * w - cvals
    dquad = -float(rt @ dmu) + 0.5 * float(dmu @ dmu)
    lo = max(2, s)
    hi = min(n, e + 2)
    pen_before = float(np.sum(np.abs(np.diff(nu[lo - 1:hi]))))
    old = seg.copy()
    nu[s:e + 1] = alpha
    pen_after = float(np.sum(np.abs(np.diff(nu[lo - 1:hi]))))
    df = dquad + lam * (pen_after - pen_before)
    if df <= _ACCEPT_SLACK * (1.0 + abs(dquad) + lam * pen_before):
        r[s:] -= dmu
        rel = float(np.max(np.abs(alpha - old))) / (1.0 + abs(alpha))
        return True, rel, alpha
    nu[s:e + 1] = old
    return False, 0.0, None


def _descent_sweep(y, nu, r, lam, reverse=False):
    """Full cyclic descent pass; suffix sums of the residual are tracked in
    scalars so the pass is O(n) plus one vector update."""
    n = y.size
    maxrel = 0.0
    suf = np.cumsum(r[::-1])[::-1]
    deltas = np.zeros(n)
    order = range(n - 1, -1, -1) if reverse else range(n)
    delta_tot = 0.0  # forward: total of earlier deltas; reverse: sum of d*(n-j)
    for k in order:
        if reverse:
            S = suf[k] - delta_tot
        else:
            S = suf[k] - delta_tot * (n - k)
        w2 = float(n - k)
        c = w2 * nu[k] + S
        b1 = nu[k - 1] if k >= 2 else None
        b2 = nu[k + 1] if (k >= 1 and k + 1 < n) else None
        prefer = nu[k + 1] if k + 1 < n else nu[k]
        v, _ = _pwq_min(w2, c, lam, b1, b2, prefer)
        d = v - nu[k]
        if d != 0.0 and abs(d) > DEADBAND * (1.0 + abs(v)):
            nu[k] = v
            deltas[k] = d
            delta_tot += d * (n - k) if reverse else d
            maxrel = max(maxrel, abs(d) / (1.0 + abs(v)))
    if maxrel > 0.0:
        r -= np.cumsum(deltas)
    return maxrel


def _fusion_sweep(y, nu, r, lam):
    """Left-to-right fusion pass: re-solve each run's common value, then try to
    absorb the run into its left neighbour with the enforced span growing one
    coordinate at a time until it covers the full preceding run.

    Returns (max relative change, count of structural merges), where a merge
    is structural only if it closed a value gap above floating-point jitter.
    """
    maxrel = 0.0
    structural = 0
    runs = _runs_of(nu)
    ri = 0
    while ri < len(runs):
        a, b = runs[ri]
        if b > a:
            acc, rel, _ = _try_fuse(y, nu, r, lam, a, b)
            if acc:
                maxrel = max(maxrel, rel)
        accepted = False
        if ri > 0:
            pa, pb = runs[ri - 1]
            gap = abs(nu[pb] - nu[a])
            if nu[pb] != nu[a]:
                for s in range(pb, pa - 1, -1):
                    acc, rel, _ = _try_fuse(y, nu, r, lam, s, b)
                    if acc:
                        maxrel = max(maxrel, rel)
                        accepted = True
                        if gap > 1e-12 * (1.0 + abs(nu[a])):
                            structural += 1
                        break
        if accepted:
            runs = _runs_of(nu)
            ri = next(i for i, (x0, x1) in enumerate(runs) if x0 <= b <= x1) + 1
        else:
            ri += 1
    return maxrel, structural


def _grouped_runs(nu, tol):
    """Run partition that also bridges sub-jitter jumps (for the polish only)."""
    n = nu.size
    scale = 1.0 + float(np.max(np.abs(nu)))
    runs = []
    s = 0
    for i in range(1, n):
        if abs(nu[i] - nu[i - 1]) > tol * scale:
            runs.append((s, i - 1))
            s = i
    runs.append((s, n - 1))
    return runs


def _run_gram(runs, n):
    """Gram matrix of run-indicator prefix columns, closed form, O(G^2)."""
    G = len(runs)
    L = np.array([b - a + 1 for a, b in runs], dtype=float)
    e = np.array([b for _, b in runs], dtype=float)
    tail = n - 1 - e
    colsum = L * (L + 1) / 2 + tail * L
    diag = L * (L + 1) * (2 * L + 1) / 6 + tail * L ** 2
    upper = np.triu(np.outer(L, colsum), 1)  # [g,h] = L_g * colsum_h for g < h
    A = upper + upper.T
    np.fill_diagonal(A, diag)
    return A


def _run_rhs(runs, y):
    """W' y for the same columns: ramp over the run plus length * suffix sum."""
    n = y.size
    suf = np.concatenate([np.cumsum(y[::-1])[::-1], [0.0]])
    cs_ty = np.concatenate([[0.0], np.cumsum(np.arange(1, n + 1) * y)])
    cs_y = np.concatenate([[0.0], np.cumsum(y)])
    out = np.empty(len(runs))
    for g, (a, b) in enumerate(runs):
        ramp = (cs_ty[b + 1] - cs_ty[a]) - a * (cs_y[b + 1] - cs_y[a])
        out[g] = ramp + (b - a + 1) * suf[b + 1]
    return out


def _structure_polish(y, nu, r, lam, group_tol=1e-10):
    """Exact run-value solve for the current fused pattern with frozen boundary
    signs; walks sign collisions (each merges two runs) until a full step fits.
    The assembled move is accepted only if the true objective does not increase.
    """
    n = y.size
    runs = _grouped_runs(nu, group_tol)
    alpha = np.array([nu[a] for a, _ in runs], dtype=float)
    Wy = _run_rhs(runs, y)
    moved = False
    for _ in range(len(runs) + 8):
        G = len(runs)
        pb = [g for g in range(1, G) if runs[g][0] >= 2]
        signs = np.array([np.sign(alpha[g] - alpha[g - 1]) for g in pb])
        h = np.zeros(G)
        for g, sg in zip(pb, signs):
            h[g] += sg
            h[g - 1] -= sg
        A = _run_gram(runs, n)
        rhs = Wy - lam * h
        try:
            astar = np.linalg.solve(A, rhs)
            astar += np.linalg.solve(A, rhs - A @ astar)  # one refinement pass
        except np.linalg.LinAlgError:
            break
        d = astar - alpha
        if not np.all(np.isfinite(d)):
            break
        theta = 1.0
        collide = -1
        for g, sg in zip(pb, signs):
            diff0 = alpha[g] - alpha[g - 1]
            ddiff = d[g] - d[g - 1]
            if ddiff != 0.0 and sg * (diff0 + ddiff) < 0:
                tc = -diff0 / ddiff
                if 0.0 <= tc < theta:
                    theta = tc
                    collide = g
        alpha = alpha + theta * d
        moved = True
        if collide < 0:
            break
        alpha[collide] = alpha[collide - 1]
        a0 = runs[collide - 1][0]
        b1 = runs[collide][1]
        runs = runs[:collide - 1] + [(a0, b1)] + runs[collide + 1:]
        alpha = np.concatenate([alpha[:collide - 1], [alpha[collide]], alpha[collide + 1:]])
        Wy = np.concatenate([Wy[:collide - 1], _run_rhs([runs[collide - 1]], y), Wy[collide + 1:]])
    if not moved:
        return 0.0
    nu_new = nu.copy()
    for g, (a, b) in enumerate(runs):
        nu_new[a:b + 1] = alpha[g]
    mu_new = np.cumsum(nu_new)
    f_old = _objective(y, np.cumsum(nu), lam)
    f_new = _objective(y, mu_new, lam)
    if f_new > f_old + _ACCEPT_SLACK * (1.0 + abs(f_old)):
        return 0.0
    rel = float(np.max(np.abs(nu_new - nu) / (1.0 + np.abs(nu_new))))
    if rel <= DEADBAND:
        return 0.0
    nu[:] = nu_new
    r[:] = y - mu_new
    return rel


def _objective(y, mu, lam):
    resid = y - mu
    return 0.5 * float(resid @ resid) + lam * float(np.sum(np.abs(mu[2:] + mu[:-2] - 2.0 * mu[1:-1])))


def _split_scan(y, nu, r, lam, slack=1e-7):
    """Attempt one sub-run joint move where the residual subgradient exceeds
    its unit bound strictly inside a run (the structure must split there).

    The trigger margin stays an order of magnitude inside the default
    certificate tolerance; a tighter margin would chase sub-certificate
    boundary noise and merge/split endlessly against the fusion cycle."""
    n = y.size
    if lam <= 0:
        return 0.0, 0
    graw = np.cumsum(np.cumsum(r))[:n - 2]
    viol = np.abs(graw) > lam * (1.0 + slack)
    if not np.any(viol):
        return 0.0, 0
    for a, b in _runs_of(nu):
        if b == a:
            continue
        for p in range(max(a + 1, 2), b + 1):
            if not viol[p - 2]:
                continue
            acc, rel, _ = _try_fuse(y, nu, r, lam, a, p - 1)
            if not acc:
                acc, rel, _ = _try_fuse(y, nu, r, lam, p, b)
            if acc:
                return rel, 1
    return 0.0, 0


def _solve_at(y, nu, r, lam, sweep_tol, max_sweeps, validate=False):
    """Alternate descent and fusion cycles (plus the guarded accelerators) at a
    fixed lambda until a full round moves nothing beyond tolerance.

    A secondary exit catches numerical stationarity: when the objective has sat
    at its floating-point floor for several rounds and remaining moves are tiny
    structure flaps at a degenerate boundary, further sweeps cannot improve the
    iterate even though the primary rule never fires.
    """
    f_prev = _objective(y, np.cumsum(nu), lam)
    stall = 0
    for sweep in range(max_sweeps):
        m1 = _descent_sweep(y, nu, r, lam, reverse=(sweep % 2 == 1))
        m2, merges = _fusion_sweep(y, nu, r, lam)
        m3 = _structure_polish(y, nu, r, lam)
        m4, splits = _split_scan(y, nu, r, lam)
        moved = max(m1, m2, m3, m4)
        if moved <= sweep_tol and merges == 0 and splits == 0:
            return sweep + 1, True
        f_now = _objective(y, np.cumsum(nu), lam)
        if validate and f_now > f_prev + 1e-9 * (1.0 + abs(f_prev)):
            raise AssertionError(f"objective increased within a sweep: {f_prev} -> {f_now}")
        if f_prev - f_now <= 1e-14 * (1.0 + abs(f_now)) and moved <= 1e-6:
            stall += 1
            if stall >= 5:
                return sweep + 1, True
        else:
            stall = 0
        f_prev = f_now
    return max_sweeps, False


def fit(y, lam: float, opts: PathwiseOptions | None = None) -> TrendFit:
    """Solve at a single penalty by climbing a lambda ladder from zero."""
    opts = opts or PathwiseOptions()
    yv = y.y if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    state = FusedState.interpolation(yv)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0.0:
        return TrendFit.from_mu(yv, state.mu(), 0.0, converged=True, solver="pathwise")
    max_sweeps = opts.max_sweeps if opts.max_sweeps is not None else 10 * yv.size
    ladder = []
    rung = min(lam, lambda_max(yv)) / 1e3
    while 0 < rung < lam:
        ladder.append(rung)
        rung *= opts.continuation_ratio
    for l in ladder:
        _solve_at(yv, state.nu, state.resid, l, opts.continuation_tol,
                  opts.continuation_sweeps, validate=opts.validate)
    _, ok = _solve_at(yv, state.nu, state.resid, lam, opts.sweep_tol, max_sweeps,
                      validate=opts.validate)
    return TrendFit.from_mu(yv, state.mu(), lam, converged=ok, solver="pathwise")


def fit_path(y, lambda_grid, sweep_tol: float = 1e-10, max_sweeps: int | None = None,
             kkt_tol: float = 1e-6, validate: bool = False) -> LambdaPath:
    """Fit every lambda on a strictly increasing grid, warm-starting each from
    the previous solution; the grid spacing is the continuation step. A rung
    that exhausts its sweep budget is flagged (fit.converged = False) and the
    path continues. Every emitted fit carries its KKT certificate.
    """
    yv = y.y if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    grid = [float(l) for l in lambda_grid]
    if not grid:
        raise ValueError("empty lambda grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("lambda values must be >= 0")
    if max_sweeps is None:
        max_sweeps = 10 * yv.size
    state = FusedState.interpolation(yv)
    entries = []
    warm = False
    for lam in grid:
        if lam == 0.0:
            fit_l = TrendFit.from_mu(yv, yv.copy(), 0.0, converged=True, solver="pathwise")
        else:
            _, ok = _solve_at(yv, state.nu, state.resid, lam, sweep_tol, max_sweeps,
                              validate=validate)
            fit_l = TrendFit.from_mu(yv, state.mu(), lam, converged=ok, solver="pathwise")
        report = check_kkt(yv, fit_l.mu_hat, lam, tol=kkt_tol)
        entries.append(PathEntry(lam=lam, fit=fit_l, warm_start=warm, kkt=report))
        warm = True
    return LambdaPath(entries=tuple(entries))
