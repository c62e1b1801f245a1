"""
Training objectives.

``n_loss`` and ``t_loss`` are the Gaussian and Student-t negative
log-likelihoods of a zero-mean shock with variance ``sigma_hat_sq``, with
additive constants dropped.  ``mse`` and ``mae`` compare volatilities, i.e.
square roots of the variance arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from garchnn import autograd as ad
from garchnn.exceptions import DomainError

__all__ = [
    "LossKind",
    "n_loss",
    "t_loss",
    "mse_loss",
    "mae_loss",
    "loss_value",
    "series_loss",
    "n_loss_grad",
    "t_loss_grad",
]

_KINDS = ("n_loss", "t_loss", "mse", "mae")
_ALIASES = {"n": "n_loss", "normal": "n_loss", "t": "t_loss", "student": "t_loss"}


@dataclass(frozen=True)
class LossKind:
    tag: str = "n_loss"
    dof: float | None = None

    def __post_init__(self):
        tag = _ALIASES.get(self.tag, self.tag)
        if tag not in _KINDS:
            raise ValueError(f"unknown loss {self.tag!r}; expected one of {_KINDS}")
        object.__setattr__(self, "tag", tag)
        if tag == "t_loss":
            dof = 5.0 if self.dof is None else float(self.dof)
            if not dof > 2.0:
                raise ValueError(f"t_loss needs dof > 2, got {dof}")
            object.__setattr__(self, "dof", dof)

    @classmethod
    def parse(cls, name: str, dof: float | None = None) -> "LossKind":
        return cls(name, dof)

    @property
    def is_likelihood(self) -> bool:
        return self.tag in ("n_loss", "t_loss")

    def __str__(self) -> str:
        return f"t_loss(v={self.dof:g})" if self.tag == "t_loss" else self.tag


def _check_var(s: float) -> None:
    if not s > 0.0:
        raise DomainError(f"predicted variance must be positive, got {s}")


def n_loss_grad(target_sq: float, sigma_hat_sq: float) -> float:
    """d n_loss / d sigma_hat_sq."""
    return 0.5 / sigma_hat_sq - 0.5 * target_sq / (sigma_hat_sq * sigma_hat_sq)


def t_loss_grad(target_sq: float, sigma_hat_sq: float, v: float) -> float:
    """d t_loss / d sigma_hat_sq."""
    s = sigma_hat_sq
    q = target_sq / ((v - 2.0) * s)
    return 0.5 / s - 0.5 * (v + 1.0) * q / (s * (1.0 + q))


def n_loss(target_sq, sigma_hat_sq):
    """``log(s)/2 + c/(2 s)``; accepts tape variables for ``sigma_hat_sq``."""
    s = ad.value_of(sigma_hat_sq)
    _check_var(s)
    c = float(target_sq)
    value = 0.5 * math.log(s) + 0.5 * c / s
    return ad.custom(value, (sigma_hat_sq,), (n_loss_grad(c, s),))


def t_loss(target_sq, sigma_hat_sq, v: float = 5.0):
    """``log(s)/2 + (v+1)/2 * log(1 + c / ((v-2) s))``."""
    if not v > 2.0:
        raise ValueError(f"t_loss needs v > 2, got {v}")
    s = ad.value_of(sigma_hat_sq)
    _check_var(s)
    c = float(target_sq)
    value = 0.5 * math.log(s) + 0.5 * (v + 1.0) * math.log1p(c / ((v - 2.0) * s))
    return ad.custom(value, (sigma_hat_sq,), (t_loss_grad(c, s, v),))


def mse_loss(target_sq, sigma_hat_sq):
    """``(sqrt(s) - sqrt(c))^2``."""
    diff = ad.sqrt(sigma_hat_sq) - math.sqrt(float(target_sq))
    return diff * diff


def mae_loss(target_sq, sigma_hat_sq):
    """``|sqrt(s) - sqrt(c)|``."""
    return ad.absolute(ad.sqrt(sigma_hat_sq) - math.sqrt(float(target_sq)))


def loss_value(kind: LossKind, target_sq, sigma_hat_sq):
    """Per-step loss of the given kind."""
    if kind.tag == "n_loss":
        return n_loss(target_sq, sigma_hat_sq)
    if kind.tag == "t_loss":
        return t_loss(target_sq, sigma_hat_sq, kind.dof)
    if kind.tag == "mse":
        return mse_loss(target_sq, sigma_hat_sq)
    return mae_loss(target_sq, sigma_hat_sq)


def series_loss(kind: LossKind | str, targets_sq, sigma_hat_sq) -> float:
    """Sum of per-step losses over aligned float arrays.

    Parameters
    ----------
    kind : LossKind or str
    targets_sq : array_like
        Squared magnitudes (squared shocks or realized variances).
    sigma_hat_sq : array_like
        Predicted variances, strictly positive.
    """
    if isinstance(kind, str):
        kind = LossKind(kind)
    c = np.asarray(targets_sq, dtype=float)
    s = np.asarray(sigma_hat_sq, dtype=float)
    if c.shape != s.shape:
        raise ValueError(f"length mismatch: {c.shape} vs {s.shape}")
    if c.size == 0:
        raise ValueError("empty input")
    if kind.is_likelihood and not np.all(s > 0):
        raise DomainError("predicted variance must be positive")
    if kind.tag == "n_loss":
        terms = 0.5 * np.log(s) + 0.5 * c / s
    elif kind.tag == "t_loss":
        v = kind.dof
        terms = 0.5 * np.log(s) + 0.5 * (v + 1.0) * np.log1p(c / ((v - 2.0) * s))
    elif kind.tag == "mse":
        terms = (np.sqrt(s) - np.sqrt(c)) ** 2
    else:
        terms = np.abs(np.sqrt(s) - np.sqrt(c))
    return float(np.sum(terms))
