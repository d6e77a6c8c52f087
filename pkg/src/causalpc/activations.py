"""Pointwise nonlinearities used on edges, each with an elementwise derivative."""

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Identity:
    name = "identity"

    @staticmethod
    def value(x):
        return x

    @staticmethod
    def deriv(x):
        return np.ones_like(x)


class ReLU:
    # derivative at 0 is taken to be 0 (subgradient choice, fixed project-wide)
    name = "relu"

    @staticmethod
    def value(x):
        return np.maximum(x, 0.0)

    @staticmethod
    def deriv(x):
        return np.where(x > 0.0, 1.0, 0.0)


class Tanh:
    name = "tanh"

    @staticmethod
    def value(x):
        return np.tanh(x)

    @staticmethod
    def deriv(x):
        t = np.tanh(x)
        return 1.0 - t * t


class ELU:
    # alpha fixed at 1
    name = "elu"

    @staticmethod
    def value(x):
        return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))

    @staticmethod
    def deriv(x):
        return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


class GELU:
    """Exact Gaussian-CDF form: x * Phi(x)."""

    name = "gelu"

    @staticmethod
    def value(x):
        return x * 0.5 * (1.0 + erf(x / _SQRT2))

    @staticmethod
    def deriv(x):
        cdf = 0.5 * (1.0 + erf(x / _SQRT2))
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return cdf + x * pdf


ACTIVATIONS = {a.name: a for a in (Identity, ReLU, Tanh, ELU, GELU)}


def get_activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; known: {sorted(ACTIVATIONS)}") from None
