"""
Random gradient-check configurations.

The loss is built exactly as training builds it (``record_forecasts`` on
one-day records, so the fused ``advance`` path is exercised for the
counterparts and the step-by-step path for GARCH-LSTM).  The same function
evaluated on floats gives the finite-difference reference.
"""

from __future__ import annotations

import numpy as np

from garchnn import autograd as ad
from garchnn import garch, nn
from garchnn.exceptions import InvalidParameterError
from garchnn.losses import LossKind, loss_value
from garchnn.training import record_forecasts

from oracles import central_difference

MODELS = ("garch11", "gjr", "figarch", "garch-lstm")
RTOL, ATOL = 1e-4, 1e-7


def _kernel_values(kind, rng, truncation):
    opts = {"truncation": truncation} if kind == "figarch" else {}
    names = garch.parameterization(kind).names
    while True:
        vals = dict(zip(names, rng.uniform(0.05, 0.6, len(names))))
        try:
            garch.params_from_dict(kind, vals, **opts)
            return vals
        except InvalidParameterError:
            continue


def random_config(kind: str, rng: np.random.Generator, steps: int = 20, truncation: int = 64):
    """``(model, raw, eps, init_var)`` with parameters in the admissible region."""
    if kind == "garch-lstm":
        kernel = ("garch11", "gjr", "figarch")[rng.integers(3)]
        model = nn.GarchLSTM(kernel, truncation=truncation)
        vals = {n: float(rng.normal(0, 0.5)) for n in nn.GATE_NAMES}
        vals["w"] = float(rng.uniform(0.0, 0.9))
        vals.update(_kernel_values(kernel, rng, truncation))
    else:
        model = nn.CounterpartModel(kind, truncation=truncation)
        vals = _kernel_values(kind, rng, truncation)
    raw = model.parameterization.to_raw(vals)
    eps = rng.standard_normal(steps + 1) * rng.uniform(0.5, 2.0)
    return model, raw, eps, float(rng.uniform(0.5, 2.0))


def make_loss(model, eps, init_var, loss: LossKind):
    """Mean one-day loss as a function of the raw parameter vector."""
    anchors = np.arange(len(eps) - 1)
    targets = eps[1:] ** 2
    pz = model.parameterization

    def f(raw):
        prep = model.prepare(pz.to_constrained(list(raw)))
        s0, st0 = model.initial_state(prep, init_var)
        out, _ = record_forecasts(model, prep, eps, anchors, 1, 1, (0, s0, st0))
        total = ad.vsum([loss_value(loss, c, u) for c, u in zip(targets, out)])
        return total * (1.0 / len(out))

    return f


def check(model, raw, eps, init_var, loss: LossKind):
    """Return ``(reverse_mode, finite_difference, ok)``."""
    f = make_loss(model, eps, init_var, loss)
    tape = ad.Tape()
    leaves = tape.variables(raw)
    g = np.array(tape.grad(f(leaves), leaves))
    fd = central_difference(lambda r: ad.value_of(f(r)), raw, rel_step=1e-5)
    ok = bool(np.all(np.abs(g - fd) <= ATOL + RTOL * np.abs(fd)))
    return g, fd, ok
