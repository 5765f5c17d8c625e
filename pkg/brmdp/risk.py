"""
Risk functionals over finite scenario sets.

A :class:`RiskFunctional` maps a collection of scenario values (one per
posterior sample or per posterior atom) to a scalar: the expectation, the
value-at-risk VaR_alpha or the conditional value-at-risk CVaR_alpha.

Without weights the scenarios are equally likely and the sample recipes are
used: VaR is the ``ceil(alpha N)``-th smallest value and CVaR is the mean of
the values strictly above that index (the maximum when none remain). With
explicit weights both are read off the weighted empirical CDF; CVaR is then
``(1/(1-alpha)) * integral_alpha^1 VaR_u du``, which agrees with the sample
recipe whenever ``alpha N`` is integral.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EXPECTATION = "expectation"
VAR = "var"
CVAR = "cvar"
KINDS = (EXPECTATION, VAR, CVAR)

# Slack on alpha * N before taking the ceiling, so 0.8 * 5 stays 4.
INDEX_SLACK = 1e-9
CDF_SLACK = 1e-12


@dataclass(frozen=True)
class RiskFunctional:
    """
    A risk functional of the given kind.

    Attributes:
        kind (str): ``expectation``, ``var`` or ``cvar``
        alpha (float or None): Confidence level in (0, 1) for ``var`` and ``cvar``
    """

    kind: str
    alpha: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError("unknown risk functional %r (expected one of %s)" % (self.kind, ", ".join(KINDS)))
        if self.kind == EXPECTATION:
            object.__setattr__(self, "alpha", None)
        elif self.alpha is None or not 0 < self.alpha < 1:
            raise DomainError("%s needs alpha in (0, 1), got %r" % (self.kind, self.alpha))
        else:
            object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def expectation(cls):
        return cls(EXPECTATION)

    @classmethod
    def var(cls, alpha):
        return cls(VAR, alpha)

    @classmethod
    def cvar(cls, alpha):
        return cls(CVAR, alpha)

    @property
    def label(self):
        return "mean" if self.kind == EXPECTATION else self.kind

    def __str__(self):
        return self.kind if self.alpha is None else "%s(%g)" % (self.kind, self.alpha)

    def apply(self, values, weights=None):
        """
        Evaluate the functional along the last axis of ``values``.

        Args:
            values (array-like): Scenario values, shape (..., N)
            weights (array-like, optional): Probability vector of length N;
                equal weights when omitted

        Returns:
            float or numpy.ndarray: A float for 1-D input, else an array of
            the leading shape

        Raises:
            DomainError: If there are no scenarios or the weights are not a
                probability vector
        """
        values = np.asarray(values, dtype=float)
        if values.ndim == 0 or values.shape[-1] == 0:
            raise DomainError("risk functional applied to an empty scenario set")
        if weights is None:
            result = self._apply_uniform(values)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != values.shape[-1:]:
                raise DomainError("weights of length %d do not match %d scenarios" % (weights.size, values.shape[-1]))
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
                raise DomainError("scenario weights must be a probability vector")
            result = self._apply_weighted(values, weights)
        return float(result) if values.ndim == 1 else result

    def _apply_uniform(self, values):
        if self.kind == EXPECTATION:
            return values.mean(axis=-1)
        count = values.shape[-1]
        ordered = np.sort(values, axis=-1, kind="stable")
        index = min(max(math.ceil(self.alpha * count - INDEX_SLACK), 1), count)
        if self.kind == VAR:
            return ordered[..., index - 1]
        if index == count:
            return ordered[..., -1]
        return ordered[..., index:].mean(axis=-1)

    def _apply_weighted(self, values, weights):
        if self.kind == EXPECTATION:
            return values @ weights
        order = np.argsort(values, axis=-1, kind="stable")
        ordered = np.take_along_axis(values, order, axis=-1)
        mass = np.broadcast_to(weights, values.shape)
        mass = np.take_along_axis(mass, order, axis=-1)
        cdf = np.cumsum(mass, axis=-1)
        cdf = cdf / cdf[..., -1:]
        if self.kind == VAR:
            first = np.argmax(cdf >= self.alpha - CDF_SLACK, axis=-1)
            return np.take_along_axis(ordered, first[..., None], axis=-1)[..., 0]
        below = cdf - mass
        share = np.clip(cdf - np.maximum(below, self.alpha), 0.0, None)
        return (ordered * share).sum(axis=-1) / (1.0 - self.alpha)

    def is_translation_invariant(self):
        """rho(X + c) = rho(X) + c; holds for every supported kind."""
        return True

    def is_positively_homogeneous(self):
        """rho(a X) = a rho(X) for a > 0; holds for every supported kind."""
        return True


def make_risk(name, alpha=None):
    """
    Build a functional from a formulation name (``mean`` is an alias of ``expectation``).

    Raises:
        DomainError: If the name is unknown or alpha is missing
    """
    if name in ("mean", EXPECTATION):
        return RiskFunctional.expectation()
    return RiskFunctional(name, alpha)


def apply(rho, values, weights=None):
    return rho.apply(values, weights)


def is_translation_invariant(rho):
    return rho.is_translation_invariant()


def is_positively_homogeneous(rho):
    return rho.is_positively_homogeneous()
