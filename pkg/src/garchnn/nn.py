"""
Neural counterparts of the GARCH family and the GARCH-LSTM cell.

The GARCH(1,1) and GJR recursions are scalar RNN cells without output layer
or activation; FIGARCH is a 1-d convolution whose kernel is the truncated
lag-weight expansion.  GARCH-LSTM keeps the LSTM forget/input gates and cell
state but replaces the output gate by one of these kernels, blending it as
``o_t * (1 + w * tanh(c_t))``.

Every function here works on plain floats and on :mod:`garchnn.autograd`
variables alike, so the same code serves filtering and gradient training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from garchnn import autograd as ad
from garchnn import garch
from garchnn.constraints import ConstrainedParam, Parameterization

__all__ = [
    "GATE_NAMES",
    "CellState",
    "figarch_weights_ad",
    "rnn_counterpart_step",
    "cnn_counterpart_step",
    "garch_lstm_step",
    "CounterpartModel",
    "GarchLSTM",
    "make_model",
    "forecast",
]

GATE_NAMES = ("W_f", "U_f", "b_f", "W_i", "U_i", "b_i", "W_c", "U_c", "b_c")


@dataclass(frozen=True)
class CellState:
    """Recurrent state carried between steps.

    ``sigma_prev_sq`` is the variance of the previous shock, ``c_prev`` the
    LSTM cell state and ``window`` the last ``T - 1`` squared shocks (oldest
    first), used only by FIGARCH kernels.
    """

    sigma_prev_sq: object
    c_prev: object = 0.0
    window: tuple = ()

    def detached(self) -> "CellState":
        return CellState(ad.value_of(self.sigma_prev_sq), ad.value_of(self.c_prev), self.window)


def figarch_weights_ad(beta, phi, d, truncation: int) -> list:
    """Differentiable version of :func:`garch.figarch_weights`.

    Returns ``[lambda_1, ..., lambda_{T-1}]`` (``lambda_0 = 0`` is omitted).
    """
    T = int(truncation)
    pi_prev = 1.0
    a_prev = 1.0
    lam = []
    for j in range(1, T):
        pi_j = pi_prev * ((j - 1) - d) * (1.0 / j)
        c_j = pi_j - phi * pi_prev
        a_j = c_j + beta * a_prev
        lam.append(-a_j)
        pi_prev, a_prev = pi_j, a_j
    return lam


def rnn_counterpart_step(kind: str, values: Mapping, eps_prev, sigma_prev_sq):
    """One step of the GARCH(1,1) or GJR recurrent cell.

    The output is the inner product of the parameter list
    ``(omega, alpha, [lambda,] beta)`` with the observation list
    ``(1, eps^2, [I(eps<0) eps^2,] sigma^2_{t-1})``.
    """
    e2 = eps_prev * eps_prev
    if kind == "garch11":
        return ad.dot(
            (values["omega"], values["alpha"], values["beta"]),
            (1.0, e2, sigma_prev_sq),
        )
    if kind == "gjr":
        neg = ad.indicator(eps_prev)
        return ad.dot(
            (values["omega"], values["alpha"], values["lambda_asym"], values["beta"]),
            (1.0, e2, neg * e2, sigma_prev_sq),
        )
    raise ValueError(f"{kind!r} is not a recurrent kernel")


def cnn_counterpart_step(intercept, weights, window):
    """FIGARCH convolution ``intercept + sum_j lambda_j eps^2_{t-j}``.

    ``weights`` is ``[lambda_1, ..., lambda_{T-1}]`` and ``window`` the
    matching ``T - 1`` squared shocks ordered oldest to newest.
    """
    if len(window) != len(weights):
        raise ValueError(f"window length {len(window)} does not match {len(weights)} weights")
    return ad.dot((intercept, *weights), (1.0, *reversed(window)))


def _kernel_output(kind: str, prep: Mapping, eps_prev, state: CellState):
    if kind == "figarch":
        return cnn_counterpart_step(prep["intercept"], prep["weights"], state.window)
    return rnn_counterpart_step(kind, prep, eps_prev, state.sigma_prev_sq)


def _push_window(window: tuple, e2: float) -> tuple:
    return window[1:] + (e2,) if window else window


def garch_lstm_step(kernel: str, prep: Mapping, eps_prev, state: CellState):
    """One GARCH-LSTM step.

    Gates read ``(eps_{t-1}, sigma^2_{t-1})``; the kernel output is scaled by
    ``1 + w * tanh(c_t)``.  Returns ``(sigma_t^2, new_state)``.
    """
    s = state.sigma_prev_sq
    e = eps_prev
    f = ad.sigmoid(ad.dot((prep["W_f"], prep["U_f"], prep["b_f"]), (e, s, 1.0)))
    i = ad.sigmoid(ad.dot((prep["W_i"], prep["U_i"], prep["b_i"]), (e, s, 1.0)))
    c_tilde = ad.tanh(ad.dot((prep["W_c"], prep["U_c"], prep["b_c"]), (e, s, 1.0)))
    c = ad.dot((f, i), (state.c_prev, c_tilde))
    window = state.window
    if kernel == "figarch":
        window = _push_window(window, e * e)
    o = _kernel_output(kernel, prep, e, CellState(s, state.c_prev, window))
    blend = ad.dot((1.0, prep["w"]), (1.0, ad.tanh(c)))
    sigma_sq = ad.mul(o, blend)
    return sigma_sq, CellState(sigma_sq, c, window)


def _kernel_spec(kind: str) -> list[ConstrainedParam]:
    return list(garch.parameterization(kind).params)


class CounterpartModel:
    """NN counterpart of a GARCH-family model.

    Parameters
    ----------
    kind : {'garch11', 'gjr', 'figarch'}
    truncation : int
        FIGARCH kernel size ``T``.
    scaled_intercept : bool
        FIGARCH intercept convention, see :class:`garch.FigarchParams`.
    strategy : {'direct', 'iterated'}
        Multi-step forecasts: ``direct`` reads the one-step output of a model
        trained for that horizon; ``iterated`` runs the recursion forward with
        squared shocks replaced by their forecasts, like the classical model.
    """

    def __init__(self, kind: str, truncation: int = garch.DEFAULT_TRUNCATION, scaled_intercept: bool = False,
                 strategy: str = "direct"):
        if kind not in garch.MODEL_KINDS:
            raise ValueError(f"unknown kernel kind {kind!r}")
        if strategy not in ("direct", "iterated"):
            raise ValueError(f"strategy must be 'direct' or 'iterated', got {strategy!r}")
        self.strategy = strategy
        self.direct = strategy == "direct"
        self.kind = kind
        self.truncation = int(truncation)
        self.scaled_intercept = bool(scaled_intercept)
        self.parameterization = Parameterization(_kernel_spec(kind))

    @property
    def name(self) -> str:
        return f"{self.kind}-nn"

    def options(self) -> dict:
        """Options forwarded to the classical parameter classes."""
        if self.kind == "figarch":
            return {"truncation": self.truncation, "scaled_intercept": self.scaled_intercept}
        return {}

    def default_values(self, sample_var: float) -> dict:
        return garch.default_params(self.kind, sample_var, **self.options()).as_dict()

    def to_params(self, values: Mapping):
        """Classical parameter object at the given float values."""
        return garch.params_from_dict(self.kind, {k: ad.value_of(v) for k, v in values.items()}, **self.options())

    def prepare(self, values: Mapping) -> dict:
        """Per-forward derived quantities (FIGARCH weights and intercept)."""
        prep = dict(values)
        if self.kind == "figarch":
            prep["weights"] = figarch_weights_ad(values["beta"], values["phi"], values["d"], self.truncation)
            omega = values["omega"]
            prep["intercept"] = omega / (1.0 - values["beta"]) if self.scaled_intercept else omega
        return prep

    def weights_feasible(self, values: Mapping) -> bool:
        if self.kind != "figarch":
            return True
        lam = garch.figarch_weights(
            ad.value_of(values["beta"]), ad.value_of(values["phi"]), ad.value_of(values["d"]),
            self.truncation, check=False,
        )
        return bool((lam[1:] >= 0).all())

    def initial_state(self, prep: Mapping, init_var: float) -> tuple:
        """``(sigma_0^2, state_0)`` for a series starting from no history."""
        if self.kind == "figarch":
            window = (0.0,) * (self.truncation - 1)
            s0 = cnn_counterpart_step(prep["intercept"], prep["weights"], window)
            return s0, CellState(s0, 0.0, window)
        return init_var, CellState(init_var)

    def step(self, prep: Mapping, eps_prev, state: CellState):
        if self.kind == "figarch":
            window = _push_window(state.window, eps_prev * eps_prev)
            s = cnn_counterpart_step(prep["intercept"], prep["weights"], window)
            return s, CellState(s, 0.0, window)
        s = rnn_counterpart_step(self.kind, prep, eps_prev, state.sigma_prev_sq)
        return s, CellState(s)

    def advance(self, prep: Mapping, eps, pos: int, s, state: CellState, stop: int):
        """Run :meth:`step` over ``eps[pos:stop]`` in one fused pass.

        Returns
        -------
        path : list
            ``path[i]`` is the variance of ``eps[pos + i]``; ``path[0] = s``.
        state_at : callable
            ``state_at(p)`` rebuilds the state held after producing ``path[p - pos]``.
        """
        e = np.asarray(eps[pos:stop], dtype=float)
        if self.kind == "figarch":
            return self._advance_conv(prep, e, pos, s, state)
        names = ("omega", "alpha", "lambda_asym", "beta") if self.kind == "gjr" else ("omega", "alpha", "beta")
        coefs = [prep[n] for n in names]
        tracked = [isinstance(c, ad.Variable) for c in coefs]
        if any(tracked) and not all(tracked):
            return self._advance_generic(prep, e, pos, s, state)
        path = [s]
        if all(tracked):
            tape = coefs[0].tape
            idx = tuple(c.index for c in coefs)
            cv = [c.value for c in coefs]
        else:
            tape, idx, cv = None, (), [float(c) for c in coefs]
        gjr = self.kind == "gjr"
        if gjr:
            w, a, lam, b = cv
        else:
            w, a, b = cv
        Var = ad.Variable
        for x in e.tolist():
            e2 = x * x
            sv = s.value if type(s) is Var else s
            # same association as ad.dot over (1, e2, [neg e2,] s)
            if gjr:
                ne2 = (1.0 if x < 0.0 else 0.0) * e2
                val = w * 1.0 + a * e2 + lam * ne2 + b * sv
                partials = (1.0, e2, ne2, sv)
            else:
                val = w * 1.0 + a * e2 + b * sv
                partials = (1.0, e2, sv)
            if tape is None:
                s = val
            elif type(s) is Var:
                s = Var(tape, val, idx + (s.index,), partials + (b,))
            else:
                s = Var(tape, val, idx, partials)
            path.append(s)
        return path, lambda p: CellState(path[p - pos])

    def _advance_generic(self, prep, e, pos, s, state):
        path, states = [s], [state]
        for x in e.tolist():
            s, state = self.step(prep, x, state)
            path.append(s)
            states.append(state)
        return path, lambda p: states[p - pos]

    def _advance_conv(self, prep, e, pos, s, state):
        width = len(state.window)
        z = np.concatenate((np.asarray(state.window, dtype=float), e * e))
        # row r holds the window after consuming eps[pos + r], newest first
        rows = sliding_window_view(z, width)[1:, ::-1]
        coefs = [prep["intercept"], *prep["weights"]]
        cv = np.array([ad.value_of(c) for c in coefs])
        # accumulate lag by lag in ad.dot order so values match the step route bit for bit
        values = np.full(len(rows), cv[0] * 1.0)
        for j in range(width):
            values = values + cv[j + 1] * rows[:, j]
        tracked = [c for c in coefs if isinstance(c, ad.Variable)]
        if tracked and len(rows):
            jac = np.concatenate((np.ones((len(rows), 1)), rows), axis=1)
            keep = [i for i, c in enumerate(coefs) if isinstance(c, ad.Variable)]
            outs = tracked[0].tape.block(values, tracked, jac[:, keep])
        else:
            outs = values.tolist()
        path = [s, *outs]

        def state_at(p):
            r = p - pos
            win = tuple(z[r : r + width].tolist())
            return CellState(path[r], 0.0, win)

        return path, state_at

    def expected_step(self, prep: Mapping, state: CellState):
        """Step with the unknown squared shock replaced by its forecast."""
        s = state.sigma_prev_sq
        if self.kind == "garch11":
            nxt = ad.dot((prep["omega"], prep["alpha"], prep["beta"]), (1.0, s, s))
            return nxt, CellState(nxt)
        if self.kind == "gjr":
            nxt = ad.dot(
                (prep["omega"], prep["alpha"], prep["lambda_asym"], prep["beta"]),
                (1.0, s, 0.5 * s, s),
            )
            return nxt, CellState(nxt)
        window = _push_window(state.window, s)
        nxt = cnn_counterpart_step(prep["intercept"], prep["weights"], window)
        return nxt, CellState(nxt, 0.0, window)


class GarchLSTM:
    """GARCH-LSTM cell with a pluggable GARCH kernel.

    Parameters
    ----------
    kernel : {'garch11', 'gjr', 'figarch'}
    truncation : int
        FIGARCH kernel size.
    fixed : mapping, optional
        Parameters held constant during training, e.g. ``{"w": 0.0}``.
    """

    direct = True

    def __init__(self, kernel: str = "gjr", truncation: int = garch.DEFAULT_TRUNCATION,
                 scaled_intercept: bool = False, fixed: Mapping[str, float] | None = None):
        self.kernel = CounterpartModel(kernel, truncation, scaled_intercept)
        self.kind = "garch-lstm"
        self.fixed = dict(fixed or {})
        spec = [ConstrainedParam(n, "identity") for n in GATE_NAMES]
        spec.append(ConstrainedParam("w", "unit"))
        spec.extend(_kernel_spec(kernel))
        for name in self.fixed:
            match = [p for p in spec if p.name == name]
            if not match:
                raise ValueError(f"unknown parameter {name!r}")
            if match[0].transform == "simplex":
                raise ValueError(f"cannot fix simplex-constrained parameter {name!r}")
        if "w" in self.fixed and not 0.0 <= self.fixed["w"] < 1.0:
            raise ValueError("w must lie in [0, 1)")
        self.full_parameterization = Parameterization(spec)
        self.parameterization = Parameterization([p for p in spec if p.name not in self.fixed])

    @property
    def name(self) -> str:
        return f"garch-lstm[{self.kernel.kind}]"

    def options(self) -> dict:
        return self.kernel.options()

    def default_values(self, sample_var: float) -> dict:
        vals = {n: 0.0 for n in GATE_NAMES}
        vals["w"] = 0.1
        vals.update(self.kernel.default_values(sample_var))
        return {n: vals[n] for n in self.parameterization.names}

    def prepare(self, values: Mapping) -> dict:
        merged = dict(self.fixed)
        merged.update(values)
        return self.kernel.prepare(merged)

    def weights_feasible(self, values: Mapping) -> bool:
        return self.kernel.weights_feasible(values)

    def initial_state(self, prep: Mapping, init_var: float) -> tuple:
        s0, kstate = self.kernel.initial_state(prep, init_var)
        return s0, CellState(s0, 0.0, kstate.window)

    def step(self, prep: Mapping, eps_prev, state: CellState):
        return garch_lstm_step(self.kernel.kind, prep, eps_prev, state)

    def expected_step(self, prep, state):
        raise NotImplementedError("GARCH-LSTM forecasts each horizon directly")


def make_model(kind: str, kernel: str = "gjr", **options):
    """Counterpart for ``garch11|gjr|figarch``; GARCH-LSTM for ``garch-lstm``."""
    if kind in ("garch-lstm", "garch_lstm"):
        return GarchLSTM(kernel, **options)
    options.pop("fixed", None)
    return CounterpartModel(kind, **options)


def forecast(model, values: Mapping, eps_window, state: CellState, h: int):
    """Variance forecast ``h`` steps after the end of ``eps_window``.

    The window is consumed from ``state``.  Recurrent counterparts iterate
    with squared shocks replaced by their forecasts; GARCH-LSTM returns its
    output directly (one trained model per horizon).

    Returns
    -------
    (forecast, state_after_window)
    """
    h = int(h)
    if h < 1:
        raise ValueError(f"horizon must be >= 1, got {h}")
    prep = model.prepare(values)
    s = None
    for e in eps_window:
        s, state = model.step(prep, e, state)
    if s is None:
        raise ValueError("empty input window")
    after = state
    if model.direct:
        return s, after
    for _ in range(h - 1):
        s, state = model.expected_step(prep, state)
    return s, after
