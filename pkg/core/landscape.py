"""Random-polynomial landscapes: exact derivatives, multistart Newton, census."""
import logging
import math
from functools import lru_cache
from typing import Tuple

import numpy as np
import sympy

import config
from core.errors import DomainError, require
from core.parallel import ordered_map, substream
from models.landscape import (CensusResult, CriticalPoint, CriticalSearch, MultiPoly,
                              ReluApproximation, monomial_table)
from models.sampling import Seed

logger = logging.getLogger("Landscape")


def kostlan_variances(exponents: np.ndarray, degree: int) -> np.ndarray:
    """Multinomial d! / ((d - |e|)! Π e_i!) for each exponent row."""
    out = np.empty(len(exponents))
    for i, e in enumerate(exponents):
        denom = math.factorial(degree - int(e.sum()))
        for v in e:
            denom *= math.factorial(int(v))
        out[i] = math.factorial(degree) / denom
    return out


def _draw_polynomial(n_vars: int, degree: int, rng: np.random.Generator) -> MultiPoly:
    exps = monomial_table(n_vars, degree)
    coeffs = rng.standard_normal(len(exps)) * np.sqrt(kostlan_variances(exps, degree))
    return MultiPoly(n_vars=n_vars, degree=degree, exponents=exps, coeffs=coeffs)


def sample_random_polynomial(n_vars: int, degree: int, seed: Seed) -> MultiPoly:
    require(1 <= n_vars <= 4, f"n_vars must lie in [1, 4], got {n_vars}")
    require(2 <= degree <= 6, f"degree must lie in [2, 6], got {degree}")
    return _draw_polynomial(n_vars, degree, substream(seed))


# --- exact evaluation -------------------------------------------------------

def _monomials(exps: np.ndarray, X: np.ndarray, degree: int) -> np.ndarray:
    """(terms, points) matrix of x^e."""
    powers = X.T[None, :, :] ** np.arange(degree + 1)[:, None, None]  # (d+1, n, m)
    out = np.ones((len(exps), X.shape[0]))
    for j in range(X.shape[1]):
        out *= powers[exps[:, j], j, :]
    return out


@lru_cache(maxsize=64)
def _derivative_tables(n_vars: int, degree: int):
    """Shifted exponents and multipliers for first and second partials."""
    exps = monomial_table(n_vars, degree)
    grad = []
    for i in range(n_vars):
        shift = exps.copy()
        shift[:, i] = np.maximum(shift[:, i] - 1, 0)
        grad.append((exps[:, i].astype(float), shift))
    hess = {}
    for i in range(n_vars):
        for j in range(i, n_vars):
            mult = exps[:, i] * (exps[:, j] - (1 if i == j else 0))
            shift = exps.copy()
            shift[:, i] -= 1
            shift[:, j] -= 1
            hess[(i, j)] = (mult.astype(float), np.maximum(shift, 0))
    return grad, hess


def evaluate(poly: MultiPoly, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return poly.coeffs @ _monomials(poly.exponents, X, poly.degree)


def gradient(poly: MultiPoly, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    grad, _ = _derivative_tables(poly.n_vars, poly.degree)
    cols = [(poly.coeffs * mult) @ _monomials(shift, X, poly.degree) for mult, shift in grad]
    return np.stack(cols, axis=1)


def hessian(poly: MultiPoly, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, hess = _derivative_tables(poly.n_vars, poly.degree)
    H = np.empty((X.shape[0], poly.n_vars, poly.n_vars))
    for (i, j), (mult, shift) in hess.items():
        H[:, i, j] = H[:, j, i] = (poly.coeffs * mult) @ _monomials(shift, X, poly.degree)
    return H


# --- critical points --------------------------------------------------------

def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(H, -g[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return -(np.linalg.pinv(H) @ g[..., None])[..., 0]


def _damped_newton(poly: MultiPoly, X: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Drive |grad| below tol from every row of X; returns (X, |grad|)."""
    X = X.copy()
    gnorm = np.linalg.norm(gradient(poly, X), axis=1)
    active = gnorm > tol
    for _ in range(config.NEWTON_MAX_ITER):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        x = X[idx]
        g = gradient(poly, x)
        step = _newton_direction(hessian(poly, x), g)
        step = np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0)
        t = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        trial_norm = gnorm[idx].copy()
        for _ in range(30):
            todo = ~accepted
            if not todo.any():
                break
            cand = x[todo] + t[todo, None] * step[todo]
            cn = np.linalg.norm(gradient(poly, cand), axis=1)
            ok = cn < gnorm[idx][todo]
            sel = np.flatnonzero(todo)[ok]
            x[sel] = cand[ok]
            trial_norm[sel] = cn[ok]
            accepted[sel] = True
            t[todo] *= 0.5
        X[idx] = x
        gnorm[idx] = trial_norm
        # stalled rows (no decrease at any step size) stop here
        done = (trial_norm <= tol) | ~accepted
        active[idx[done]] = False
    return X, gnorm


def _classify(poly: MultiPoly, x: np.ndarray, gnorm: float) -> CriticalPoint:
    eig = np.linalg.eigvalsh(hessian(poly, x[None, :])[0])
    scale = max(1.0, float(np.max(np.abs(eig))))
    degenerate = bool(np.min(np.abs(eig)) <= config.DEGENERATE_EIG_RTOL * scale)
    return CriticalPoint(
        location=[float(v) for v in x],
        gradient_norm=float(gnorm),
        hessian_eigenvalues=[float(v) for v in eig],
        index=float(np.sum(eig < 0)) / poly.n_vars,
        degenerate=degenerate,
    )


def _search(poly: MultiPoly, box_half_width: float, starts: int, tol: float,
            rng: np.random.Generator) -> CriticalSearch:
    X0 = rng.uniform(-box_half_width, box_half_width, size=(starts, poly.n_vars))
    X, gnorm = _damped_newton(poly, X0, tol)
    ok = (gnorm <= tol) & np.all(np.abs(X) <= box_half_width, axis=1)
    converged = int(np.sum(gnorm <= tol))

    kept = []
    for i in np.flatnonzero(ok)[np.argsort(gnorm[ok], kind="stable")]:
        if all(np.linalg.norm(X[i] - X[j]) >= config.DEDUP_RADIUS for j in kept):
            kept.append(i)
    kept.sort(key=lambda i: tuple(X[i]))
    points = [_classify(poly, X[i], gnorm[i]) for i in kept]
    return CriticalSearch(
        points=points,
        starts=starts,
        converged=converged,
        nonconverged_fraction=1.0 - converged / starts,
    )


def find_critical_points(poly: MultiPoly, box_half_width: float = None, starts: int = None,
                         tol: float = None, seed: Seed = Seed(value=0)) -> CriticalSearch:
    box_half_width = box_half_width or config.SEARCH_HALF_WIDTH
    starts = starts or default_starts(poly.n_vars, poly.degree)
    tol = tol or config.CRITICAL_TOL
    require(starts >= 100, f"starts must be >= 100, got {starts}")
    require(1e-12 <= tol <= 1e-6, f"tol must lie in [1e-12, 1e-6], got {tol}")
    require(box_half_width > 0, f"box_half_width must be > 0, got {box_half_width}")
    result = _search(poly, box_half_width, starts, tol, substream(seed))
    if result.nonconverged_fraction > 0.5:
        logger.warning("%.0f%% of starts did not converge", 100 * result.nonconverged_fraction)
    return result


def default_starts(n_vars: int, degree: int) -> int:
    return max(100, config.STARTS_PER_MONOMIAL * math.comb(n_vars + degree, degree))


def sturm_root_count(poly: MultiPoly, lo: float, hi: float) -> int:
    """Distinct real roots of p' in [lo, hi], by exact rational Sturm sequence."""
    require(poly.n_vars == 1, "Sturm counting needs a univariate polynomial")
    x = sympy.Symbol("x")
    p = sum(sympy.Rational(float(c)) * x ** int(e[0]) for c, e in zip(poly.coeffs, poly.exponents))
    dp = sympy.Poly(sympy.diff(p, x), x, domain=sympy.QQ)
    if dp.is_zero:
        raise DomainError("p' vanishes identically")
    if dp.degree() == 0:
        return 0
    chain = sympy.sturm(dp)
    a, b = sympy.Rational(lo), sympy.Rational(hi)

    def variations(v):
        signs = [s for s in (sympy.sign(q.eval(v)) for q in chain) if s != 0]
        return sum(1 for u, w in zip(signs, signs[1:]) if u != w)

    # the count covers (lo, hi]; add lo itself when it is a root
    return variations(a) - variations(b) + (1 if dp.eval(a) == 0 else 0)


def bound_C(n_vars: int, degree: int) -> float:
    return math.sqrt(2.0) * (degree - 1) ** ((n_vars + 1) / 2.0)


def log_minima_shape(n_vars: int, degree: int) -> float:
    return -n_vars**2 * math.log(3.0) / 4.0 + (n_vars + 1) / 2.0 * math.log(degree - 1)


def census(n_vars: int, degree: int, trials: int, seed: Seed,
           box_half_width: float = None, starts: int = None, tol: float = None) -> CensusResult:
    require(trials >= 50, f"trials must be >= 50, got {trials}")
    require(1 <= n_vars <= 4 and 2 <= degree <= 6, f"(n, d)=({n_vars}, {degree}) outside desk scale")
    box_half_width = box_half_width or config.SEARCH_HALF_WIDTH
    starts = starts or default_starts(n_vars, degree)
    tol = tol or config.CRITICAL_TOL

    def trial(t):
        poly = _draw_polynomial(n_vars, degree, substream(seed, t, 0))
        res = _search(poly, box_half_width, starts, tol, substream(seed, t, 1))
        return len(res.points), len(res.minima), len(res.degenerate), res.nonconverged_fraction

    logger.info("census n=%d d=%d: %d trials x %d starts", n_vars, degree, trials, starts)
    rows = np.asarray(ordered_map(trial, range(trials)), dtype=float)
    crit, mins, degen, nonconv = rows.T
    mean_crit = float(crit.mean())
    mean_min = float(mins.mean())
    crit_se = float(crit.std(ddof=1) / math.sqrt(trials))
    if crit.sum() > 0:
        frac = float(mins.sum() / crit.sum())
        # delta method for a ratio of means
        resid = mins - frac * crit
        frac_se = float(resid.std(ddof=1) / (math.sqrt(trials) * mean_crit))
    else:
        frac, frac_se = 0.0, 0.0
    C = bound_C(n_vars, degree)
    within = mean_crit <= C + 2.0 * crit_se
    if not within:
        logger.warning("mean count %.4f exceeds bound %.4f + 2se", mean_crit, C)
    return CensusResult(
        n_vars=n_vars,
        degree=degree,
        trials=trials,
        mean_critical_points=mean_crit,
        critical_stderr=crit_se,
        mean_minima=mean_min,
        minima_fraction=frac,
        minima_fraction_stderr=frac_se,
        degenerate_rate=float(degen.sum() / max(crit.sum(), 1.0)),
        nonconverged_fraction=float(nonconv.mean()),
        bound_C=C,
        within_bound=bool(within),
        log_minima_shape=log_minima_shape(n_vars, degree),
        bound_note=f"sqrt(2)(d-1)^((n+1)/2) over the box |x_i| <= {box_half_width:g}",
    )


# --- ReLU and max as polynomials ------------------------------------------

def _remez_sqrt(K: int, grid_points: int = 20001, max_iter: int = 60):
    """Minimax degree-K fit of sqrt(t) on [0, 1] in the Chebyshev basis.

    Returns (coefficients, levelled error, iterations).
    """
    s = np.linspace(0.0, 1.0, grid_points)
    t_grid = s * s  # dense near 0 where sqrt is steep
    f_grid = s
    ref = 0.5 * (1.0 - np.cos(np.pi * np.arange(K + 2) / (K + 1)))
    coeffs, E = np.zeros(K + 1), 0.0
    for it in range(1, max_iter + 1):
        A = np.empty((K + 2, K + 2))
        A[:, :K + 1] = np.polynomial.chebyshev.chebvander(2.0 * ref - 1.0, K)
        A[:, K + 1] = (-1.0) ** np.arange(K + 2)
        sol = np.linalg.solve(A, np.sqrt(ref))
        coeffs, E = sol[:K + 1], abs(sol[K + 1])
        err = f_grid - np.polynomial.chebyshev.chebval(2.0 * t_grid - 1.0, coeffs)
        peak = float(np.max(np.abs(err)))
        if peak - E <= 1e-12 * max(1.0, peak):
            return coeffs, peak, it
        # one extremum per run of constant sign
        sign = np.sign(err)
        sign[sign == 0] = 1
        cuts = np.flatnonzero(np.diff(sign)) + 1
        ext = [seg[np.argmax(np.abs(err[seg]))] for seg in np.split(np.arange(len(err)), cuts)]
        while len(ext) > K + 2:
            if abs(err[ext[0]]) < abs(err[ext[-1]]):
                ext.pop(0)
            else:
                ext.pop()
        if len(ext) < K + 2:
            break
        ref = t_grid[ext]
    return coeffs, peak, it


def relu_poly_approx(degree: int, grid_points: int = None) -> ReluApproximation:
    require(isinstance(degree, int) and degree >= 1, f"degree must be an integer >= 1, got {degree}")
    K = degree // 2
    cheb, abs_err, iterations = _remez_sqrt(K)
    power_t = np.polynomial.Chebyshev(cheb, domain=[0.0, 1.0]).convert(kind=np.polynomial.Polynomial).coef
    coefficients = np.zeros(2 * K + 2)
    coefficients[0::2][:len(power_t)] = 0.5 * power_t
    coefficients[1] += 0.5
    approx = ReluApproximation(
        degree=degree,
        coefficients=[float(c) for c in coefficients],
        sqrt_chebyshev=[float(c) for c in cheb],
        abs_error=float(abs_err),
        sup_error=0.0,
        iterations=iterations,
    )
    x = np.linspace(-1.0, 1.0, grid_points or config.RELU_GRID_POINTS)
    sup = float(np.max(np.abs(approx.evaluate(x) - np.maximum(x, 0.0))))
    return approx.model_copy(update={"sup_error": sup})


def max_via_relu(x, y):
    """max(x, y) = ReLU(x - y) + y."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.maximum(x - y, 0.0) + y


def polynomial_max(x, y, approx: ReluApproximation, scale: float = 1.0):
    """max(x, y) with ReLU replaced by its minimax polynomial, valid for |x - y| <= scale.

    The error is at most scale * approx.sup_error.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    require(scale > 0, f"scale must be > 0, got {scale}")
    return scale * approx.evaluate((x - y) / scale) + y


def max_via_relu_ratio(x, y):
    """(x ReLU(x - y) + y ReLU(y - x)) / |x - y|; undefined (NaN) on x == y."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    gap = np.abs(x - y)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (x * np.maximum(x - y, 0.0) + y * np.maximum(y - x, 0.0)) / gap
    return np.where(gap == 0, np.nan, out)
