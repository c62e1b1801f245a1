"""
GARCH(1,1), GJR-GARCH and FIGARCH(1,d,1) conditional-variance recursions,
simulation and maximum-likelihood estimation.

All models assume a zero conditional mean, so shocks equal returns.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import ClassVar

import numpy as np
from scipy.optimize import minimize

from garchnn.constraints import ConstrainedParam, Parameterization
from garchnn.exceptions import DataError, InvalidParameterError, NumericalError
from garchnn.losses import LossKind, series_loss

__all__ = [
    "Garch11Params",
    "GjrParams",
    "FigarchParams",
    "FitReport",
    "MODEL_KINDS",
    "garch11_step",
    "gjr_step",
    "figarch_weights",
    "figarch_step",
    "initial_variance",
    "filter_series",
    "simulate",
    "fit_mle",
    "params_from_dict",
    "default_params",
    "parameterization",
    "MIN_FIT_LENGTH",
]

MODEL_KINDS = ("garch11", "gjr", "figarch")
MIN_FIT_LENGTH = 30
DEFAULT_TRUNCATION = 64


@dataclass(frozen=True)
class Garch11Params:
    omega: float
    alpha: float
    beta: float

    kind: ClassVar[str] = "garch11"

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameterError("alpha and beta must be non-negative")
        if not self.alpha + self.beta < 1:
            raise InvalidParameterError(
                f"alpha + beta must be < 1 for stationarity, got {self.alpha + self.beta}"
            )

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class GjrParams:
    omega: float
    alpha: float
    lambda_asym: float
    beta: float

    kind: ClassVar[str] = "gjr"

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega}")
        if min(self.alpha, self.lambda_asym, self.beta) < 0:
            raise InvalidParameterError("alpha, lambda_asym and beta must be non-negative")
        if not self.persistence < 1:
            raise InvalidParameterError(
                f"alpha + lambda_asym/2 + beta must be < 1, got {self.persistence}"
            )

    @property
    def persistence(self) -> float:
        return self.alpha + 0.5 * self.lambda_asym + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class FigarchParams:
    """FIGARCH(1,d,1) parameters.

    ``scaled_intercept`` selects the textbook intercept ``omega / (1 - beta)``
    instead of using ``omega`` directly as the additive constant.
    """

    omega: float
    beta: float
    phi: float
    d: float
    truncation: int = DEFAULT_TRUNCATION
    scaled_intercept: bool = False
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    kind: ClassVar[str] = "figarch"

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega}")
        if not (0 <= self.beta < 1 and 0 <= self.phi < 1):
            raise InvalidParameterError("beta and phi must lie in [0, 1)")
        if not 0 < self.d < 1:
            raise InvalidParameterError(f"d must lie in (0, 1), got {self.d}")
        if int(self.truncation) < 2:
            raise InvalidParameterError(f"truncation must be >= 2, got {self.truncation}")
        object.__setattr__(self, "truncation", int(self.truncation))
        lam = figarch_weights(self.beta, self.phi, self.d, self.truncation)
        lam.setflags(write=False)
        object.__setattr__(self, "weights", lam)

    @property
    def intercept(self) -> float:
        return self.omega / (1.0 - self.beta) if self.scaled_intercept else self.omega

    @property
    def persistence(self) -> float:
        return float(np.sum(self.weights))

    @property
    def unconditional_variance(self) -> float:
        return self.intercept / (1.0 - self.persistence)

    def as_dict(self) -> dict[str, float]:
        return {"omega": self.omega, "beta": self.beta, "phi": self.phi, "d": self.d}


_PARAM_TYPES = {"garch11": Garch11Params, "gjr": GjrParams, "figarch": FigarchParams}


def params_from_dict(kind: str, values: dict, **options):
    """Build the parameter object for ``kind`` from a name -> value mapping."""
    try:
        cls = _PARAM_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}") from None
    names = [f.name for f in fields(cls) if f.init]
    kwargs = {k: float(values[k]) for k in names if k in values and k not in options}
    if kind == "figarch":
        if "truncation" in values and "truncation" not in options:
            options["truncation"] = int(values["truncation"])
    kwargs.update(options)
    return cls(**kwargs)


def parameterization(kind: str) -> Parameterization:
    """Unconstrained reparameterization used by both fitting routes."""
    if kind == "garch11":
        spec = [
            ConstrainedParam("omega", "softplus"),
            ConstrainedParam("alpha", "simplex", "persistence"),
            ConstrainedParam("beta", "simplex", "persistence"),
        ]
    elif kind == "gjr":
        spec = [
            ConstrainedParam("omega", "softplus"),
            ConstrainedParam("alpha", "simplex", "persistence"),
            ConstrainedParam("lambda_asym", "simplex", "persistence", scale=2.0),
            ConstrainedParam("beta", "simplex", "persistence"),
        ]
    elif kind == "figarch":
        spec = [
            ConstrainedParam("omega", "softplus"),
            ConstrainedParam("beta", "unit"),
            ConstrainedParam("phi", "unit"),
            ConstrainedParam("d", "unit"),
        ]
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return Parameterization(spec)


def default_params(kind: str, sample_var: float = 1.0, **options):
    """Persistent starting point whose unconditional variance is ``sample_var``."""
    omega = 0.1 * sample_var
    if kind == "garch11":
        return Garch11Params(omega, 0.1, 0.8)
    if kind == "gjr":
        return GjrParams(omega, 0.05, 0.1, 0.8)
    if kind == "figarch":
        return FigarchParams(omega, 0.2, 0.2, 0.4, **options)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# One-step recursions
# ---------------------------------------------------------------------------


def garch11_step(p: Garch11Params, eps_prev_sq: float, sigma_prev_sq: float) -> float:
    """``omega + alpha * eps_{t-1}^2 + beta * sigma_{t-1}^2``."""
    return p.omega + p.alpha * eps_prev_sq + p.beta * sigma_prev_sq


def gjr_step(p: GjrParams, eps_prev: float, sigma_prev_sq: float) -> float:
    """GJR recursion; the asymmetric term fires on strictly negative shocks."""
    e2 = eps_prev * eps_prev
    neg = 1.0 if eps_prev < 0.0 else 0.0
    return p.omega + p.alpha * e2 + p.lambda_asym * neg * e2 + p.beta * sigma_prev_sq


def figarch_weights(beta: float, phi: float, d: float, truncation: int, check: bool = True) -> np.ndarray:
    r"""Leading coefficients of :math:`1 - (1-\beta B)^{-1}(1-\phi B)(1-B)^d`.

    Parameters
    ----------
    beta, phi : float
        Autoregressive and moving-average coefficients in ``[0, 1)``.
    d : float
        Fractional differencing order in ``(0, 1)``.
    truncation : int
        Number of coefficients ``T`` to return (``lambda_0`` included).
    check : bool
        Raise if any lag weight is negative.

    Returns
    -------
    ndarray
        ``(lambda_0, ..., lambda_{T-1})`` with ``lambda_0 = 0``.

    Raises
    ------
    InvalidParameterError
        If ``check`` and some ``lambda_j < 0`` for ``j >= 1``.
    """
    T = int(truncation)
    if T < 2:
        raise InvalidParameterError(f"truncation must be >= 2, got {T}")
    # binomial expansion of (1 - B)^d
    pi = np.empty(T)
    pi[0] = 1.0
    for j in range(1, T):
        pi[j] = pi[j - 1] * (j - 1 - d) / j
    # times (1 - phi B)
    c = pi.copy()
    c[1:] -= phi * pi[:-1]
    # divided by (1 - beta B)
    a = np.empty(T)
    a[0] = c[0]
    for j in range(1, T):
        a[j] = c[j] + beta * a[j - 1]
    lam = -a
    lam[0] = 0.0
    if check and np.any(lam[1:] < 0):
        j = int(np.flatnonzero(lam[1:] < 0)[0]) + 1
        raise InvalidParameterError(
            f"negative FIGARCH lag weight lambda_{j}={lam[j]:.3g} for "
            f"beta={beta}, phi={phi}, d={d}"
        )
    return lam


def figarch_step(p: FigarchParams, eps_sq_window, weights=None) -> float:
    """``intercept + sum_j lambda_j * eps^2_{t-j}``.

    ``eps_sq_window`` holds ``T`` squared shocks ordered oldest to newest; its
    last element is the contemporaneous slot weighted by ``lambda_0 = 0``.
    """
    lam = p.weights if weights is None else np.asarray(weights, dtype=float)
    window = np.asarray(eps_sq_window, dtype=float)
    if window.shape != lam.shape:
        raise ValueError(f"window length {window.size} does not match truncation {lam.size}")
    return p.intercept + float(np.dot(lam[::-1], window))


# ---------------------------------------------------------------------------
# Filtering and simulation
# ---------------------------------------------------------------------------


def initial_variance(eps) -> float:
    """Mean squared shock, the zero-mean sample variance."""
    eps = np.asarray(eps, dtype=float)
    v = float(np.mean(eps**2))
    return v if v > 0 else 1.0


def filter_series(params, eps, init: float | None = None) -> np.ndarray:
    """Conditional variance of each shock given the preceding ones.

    Parameters
    ----------
    params : Garch11Params, GjrParams or FigarchParams
    eps : array_like
        Shock series.
    init : float, optional
        Variance assigned to the first shock (GARCH/GJR only).  Defaults to
        :func:`initial_variance` of ``eps``.  FIGARCH uses a zero-padded
        window instead.

    Returns
    -------
    ndarray
        ``sigma2[t]`` aligned with ``eps[t]``.
    """
    eps = np.asarray(eps, dtype=float)
    n = eps.size
    if n == 0:
        raise DataError("cannot filter an empty series")
    if params.kind == "figarch":
        lam = params.weights
        e2 = eps**2
        # sigma2[t] = c + sum_{j>=1} lam_j e2[t-j], zero-padded on the left
        conv = np.convolve(e2, lam)[:n]
        sigma2 = params.intercept + conv
    else:
        s = initial_variance(eps) if init is None else float(init)
        sigma2 = np.empty(n)
        sigma2[0] = s
        if params.kind == "garch11":
            for t in range(1, n):
                e = eps[t - 1]
                s = garch11_step(params, e * e, s)
                sigma2[t] = s
        else:
            for t in range(1, n):
                s = gjr_step(params, eps[t - 1], s)
                sigma2[t] = s
    if not np.all(np.isfinite(sigma2)) or not np.all(sigma2 > 0):
        bad = int(np.flatnonzero(~(np.isfinite(sigma2) & (sigma2 > 0)))[0])
        raise NumericalError(f"invalid conditional variance {sigma2[bad]} at index {bad}", index=bad)
    return sigma2


def forecast_variances(params, eps, anchors, h: int, init: float | None = None) -> np.ndarray:
    """Iterated daily variance forecasts made at each anchor.

    Unknown squared shocks are replaced by their conditional expectation, the
    forecast variance; the GJR asymmetric term then contributes half of it
    (symmetric innovations).

    Parameters
    ----------
    params : Garch11Params, GjrParams or FigarchParams
    eps : array_like
        Shock series; only ``eps[:t+1]`` is used for the forecasts at ``t``.
    anchors : array_like of int
        Forecast origins, ``0 <= t < len(eps)``.
    h : int
        Number of days ahead.
    init : float, optional
        Variance of ``eps[0]``; :func:`initial_variance` of ``eps`` by default.

    Returns
    -------
    ndarray, shape (len(anchors), h)
        Column ``j`` holds ``sigma^2_{t+j+1 | t}``.
    """
    h = int(h)
    if h < 1:
        raise ValueError(f"horizon must be >= 1, got {h}")
    eps = np.asarray(eps, dtype=float)
    anchors = np.asarray(anchors, dtype=int)
    if anchors.size and (anchors.min() < 0 or anchors.max() >= eps.size):
        raise IndexError("anchor outside the series")
    init = initial_variance(eps) if init is None else float(init)
    # a trailing dummy shock exposes sigma^2 one step past the last observation
    path = filter_series(params, np.append(eps, 0.0), init)
    out = np.empty((anchors.size, h))
    out[:, 0] = path[anchors + 1]
    if params.kind == "figarch":
        lam = params.weights
        T = lam.size
        e2 = eps**2
        for r, t in enumerate(anchors):
            hist = np.zeros(T + h)
            lo = max(0, t - T + 1)
            hist[T - (t + 1 - lo) : T] = e2[lo : t + 1]
            # hist[T-1] is eps_t^2; forecasts fill hist[T:] as they are made
            for j in range(1, h):
                hist[T + j - 1] = out[r, j - 1]
                window = hist[j : T + j][::-1]
                out[r, j] = params.intercept + float(lam[1:] @ window[: T - 1])
        return out
    if params.kind == "garch11":
        persistence = params.alpha + params.beta
    else:
        persistence = params.alpha + 0.5 * params.lambda_asym + params.beta
    for j in range(1, h):
        out[:, j] = params.omega + persistence * out[:, j - 1]
    return out


def _innovations(rng: np.random.Generator, size: int, dist: str, dof: float | None) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(size)
    if dist in ("t", "student-t", "student"):
        v = 5.0 if dof is None else float(dof)
        if not v > 2:
            raise InvalidParameterError(f"Student-t innovations need dof > 2, got {v}")
        return rng.standard_t(v, size) * math.sqrt((v - 2.0) / v)
    raise ValueError(f"unknown innovation distribution {dist!r}")


def simulate(
    params,
    n: int,
    seed: int,
    dist: str = "normal",
    dof: float | None = None,
    burn: int = 500,
    return_variance: bool = False,
):
    """Draw a shock series from the model.

    Innovations have unit variance (Student-t draws are rescaled by
    ``sqrt((v-2)/v)``).  The first ``burn`` draws are discarded so that the
    returned series starts near the stationary regime.

    Returns
    -------
    ndarray or (ndarray, ndarray)
        Shocks, and their conditional variances if ``return_variance``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    total = n + int(burn)
    z = _innovations(rng, total, dist, dof)
    eps = np.empty(total)
    sigma2 = np.empty(total)
    if params.kind == "figarch":
        lam = params.weights
        T = lam.size
        c = params.intercept
        e2 = np.zeros(total + T)  # left zero padding of length T
        for t in range(total):
            s = c + float(np.dot(lam[:0:-1], e2[t + 1 : t + T]))
            sigma2[t] = s
            eps[t] = z[t] * math.sqrt(s)
            e2[t + T] = eps[t] * eps[t]
    else:
        s = params.unconditional_variance
        step = garch11_step if params.kind == "garch11" else None
        for t in range(total):
            if t > 0:
                e = eps[t - 1]
                s = step(params, e * e, s) if step else gjr_step(params, e, s)
            sigma2[t] = s
            eps[t] = z[t] * math.sqrt(s)
    eps, sigma2 = eps[burn:], sigma2[burn:]
    return (eps, sigma2) if return_variance else eps


# ---------------------------------------------------------------------------
# Maximum likelihood
# ---------------------------------------------------------------------------


@dataclass
class FitReport:
    kind: str
    loss: str
    method: str
    iterations: int
    evaluations: int
    init_loss: float
    final_loss: float
    converged: bool
    message: str
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


_PENALTY = 1e12


def _objective_factory(kind, eps, loss: LossKind, init_var, options):
    pz = parameterization(kind)
    e2 = eps**2

    def objective(raw):
        vals = pz.to_constrained(list(raw))
        try:
            p = params_from_dict(kind, vals, **options)
            sigma2 = filter_series(p, eps, init_var)
        except (InvalidParameterError, NumericalError):
            return _PENALTY
        return series_loss(loss, e2, sigma2)

    return pz, objective


# (beta, phi, d) starting points for FIGARCH multistart
_FIGARCH_GRID = ((0.1, 0.1, 0.3), (0.5, 0.4, 0.5), (0.8, 0.7, 0.7), (0.3, 0.1, 0.7), (0.6, 0.2, 0.4))


def _start_grid(kind: str, init, options) -> list:
    if kind != "figarch":
        return []
    out = []
    for beta, phi, d in _FIGARCH_GRID:
        try:
            out.append(FigarchParams(init.omega, beta, phi, d, **options))
        except InvalidParameterError:
            continue
    return out


def fit_mle(
    kind: str,
    eps,
    loss: LossKind | str = "n_loss",
    init=None,
    *,
    method: str = "auto",
    maxiter: int = 2000,
    tol: float = 1e-9,
    truncation: int = DEFAULT_TRUNCATION,
    scaled_intercept: bool = False,
    init_var: float | None = None,
    multistart: bool | None = None,
):
    """Estimate model parameters by minimising the negative log-likelihood.

    Parameters
    ----------
    kind : {'garch11', 'gjr', 'figarch'}
    eps : array_like
        Shock series, at least ``MIN_FIT_LENGTH`` long.
    loss : LossKind or str
        ``n_loss`` or ``t_loss``.
    init : parameter object, optional
        Starting values; :func:`default_params` when omitted.
    method : str
        ``'auto'`` uses BFGS for GARCH/GJR and Nelder-Mead for FIGARCH, whose
        weight-positivity region has a hard edge.  Any unconstrained
        :func:`scipy.optimize.minimize` method is accepted.
    maxiter : int
        Iteration cap passed to the optimizer.
    tol : float
        Convergence tolerance passed to the optimizer.
    multistart : bool, optional
        Also start from each admissible point of a small ``(beta, phi, d)``
        grid and keep the best optimum.  Defaults to on for FIGARCH without
        an explicit ``init``; its likelihood has several local optima.

    Returns
    -------
    params, FitReport
        Estimated parameters and optimisation summary.  If the optimizer
        ends above the starting loss, the starting values are returned.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 1 or eps.size < MIN_FIT_LENGTH:
        raise DataError(f"fitting needs a 1-D series of at least {MIN_FIT_LENGTH} points")
    if not np.all(np.isfinite(eps)):
        raise DataError("shock series contains non-finite values")
    loss = LossKind(loss) if isinstance(loss, str) else loss
    if not loss.is_likelihood:
        raise ValueError("maximum likelihood fitting needs n_loss or t_loss")
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    options = {"truncation": truncation, "scaled_intercept": scaled_intercept} if kind == "figarch" else {}
    init_var = initial_variance(eps) if init_var is None else float(init_var)
    pz, objective = _objective_factory(kind, eps, loss, init_var, options)
    if multistart is None:
        multistart = kind == "figarch" and init is None
    if init is None:
        init = default_params(kind, init_var, **options)
    if init.kind != kind:
        raise ValueError(f"initial parameters are {init.kind!r}, expected {kind!r}")
    starts = [init]
    if multistart:
        starts += _start_grid(kind, init, options)
    x0 = pz.to_raw(init.as_dict())
    init_loss = objective(x0)
    if method == "auto":
        method = "Nelder-Mead" if kind == "figarch" else "BFGS"
    opts = {"maxiter": maxiter}
    if method == "Nelder-Mead":
        opts.update(xatol=1e-7, fatol=tol, adaptive=True)
    elif method == "BFGS":
        opts.update(gtol=1e-6 * max(1.0, eps.size))

    start = time.perf_counter()
    best = None
    nit = nfev = 0
    for p0 in starts:
        res = minimize(objective, pz.to_raw(p0.as_dict()), method=method, tol=tol, options=opts)
        if method == "BFGS" and not res.success:
            # BFGS line searches stall on flat likelihood ridges; polish with the simplex
            polish = minimize(objective, res.x, method="Nelder-Mead",
                              options={"maxiter": maxiter, "xatol": 1e-7, "fatol": tol, "adaptive": True})
            if polish.fun <= res.fun:
                res = polish
        nit += int(getattr(res, "nit", 0))
        nfev += int(getattr(res, "nfev", 0))
        if best is None or res.fun < best.fun:
            best = res
    res = best
    seconds = time.perf_counter() - start

    final = float(res.fun)
    if final <= init_loss:
        params = params_from_dict(kind, pz.to_constrained(list(res.x)), **options)
    else:
        params, final = init, init_loss
    report = FitReport(
        kind=kind,
        loss=str(loss),
        method=method,
        iterations=nit,
        evaluations=nfev,
        init_loss=float(init_loss),
        final_loss=final,
        converged=bool(res.success),
        message=str(res.message),
        seconds=seconds,
    )
    return params, report
