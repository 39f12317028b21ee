"""
# Model

Parameters, standing assumptions and the matrix form of the state
dynamics for the liquidation problem.

The controlled state is the triple (X, Y, C): inventory, transient price
impact and expected child order flow. With a strategy Z (cumulative
volume sold) the dynamics read

    dX = -dZ
    dY = (-rho Y + gamma1 dC/dt) dt + gamma2 dZ + sigma dW
    dC/dt = -(beta - alpha) C + alpha (E[x0] - E[X])

or, in matrix form,

    dS = (H S + Hbar E[S] + G) dt + Dvec dW + K dZ

## Goals

* One immutable value type per concept, safe to share across workers
* Standing assumptions checked once, at the edge, with errors that name
  the failing inequality

## Non-goals

* Stochastic volatility models
* Calibration from market data
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from liqtools.python.typehelpers import isFiniteNum, requireNum

log = logging.getLogger(__name__)

# Relative slack used when checking PSD covariances.
COV_TOLERANCE = 1e-12

# Relative slack below which the case quantity counts as zero.
CASE_TOLERANCE = 1e-12


##
## Volatility schedule.
##

@dataclass(frozen=True)
class SigmaSchedule:
    """Right-continuous piecewise-constant volatility. Segment k holds
    'values[k]' on [breakpoints[k], breakpoints[k+1]); the last segment
    runs to the end of the horizon."""
    breakpoints: tuple = (0.0,)
    values: tuple = (0.0,)

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise ValueError("'breakpoints' and 'values' must be non-empty and of equal length.")
        if self.breakpoints[0] != 0.0:
            raise ValueError("The first sigma breakpoint must be 0.")
        if any(b1 <= b0 for b0, b1 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("Sigma breakpoints must be strictly increasing.")

    @staticmethod
    def constant(value):
        """Returns the single-segment schedule with the passed value."""
        return SigmaSchedule((0.0,), (float(value),))

    def __call__(self, t):
        """Evaluates sigma at a time or an array of times."""
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side='right') - 1
        vals = np.asarray(self.values, dtype=float)[np.maximum(idx, 0)]
        return float(vals) if np.ndim(vals) == 0 else vals

    def isZero(self):
        return all(v == 0.0 for v in self.values)

    def describe(self):
        """Returns the config-file form of the schedule."""
        if len(self.values) == 1:
            return repr(self.values[0])

        return ', '.join('%r:%r' % (b, v) for b, v in zip(self.breakpoints, self.values))


##
## Parameters.
##

@dataclass(frozen=True)
class ModelParams:
    """Model constants. 'lam' is the risk-aversion weight (lambda is a
    Python keyword)."""
    gamma1: float
    gamma2: float
    rho: float
    alpha: float
    beta: float
    lam: float
    T: float
    sigma: SigmaSchedule = field(default_factory=SigmaSchedule)
    x0Mean: float = 1.0
    x0Var: float = 0.0
    y0: float = 0.0
    c0: float = 0.0

    @property
    def meanReversion(self):
        """beta - alpha"""
        return self.beta - self.alpha

    @property
    def aTilde(self):
        """Denominator of the deviation feedback, gamma2 rho + lambda."""
        return self.gamma2 * self.rho + self.lam

    @property
    def a(self):
        """Denominator of the mean feedback, gamma2 rho - gamma1 alpha + lambda."""
        return self.gamma2 * self.rho - self.gamma1 * self.alpha + self.lam

    @property
    def caseQuantity(self):
        """gamma1 alpha - gamma2 rho + gamma2 (beta - alpha); its sign splits
        the well-posedness cases. Rounding-level values are returned as 0."""
        terms = (self.gamma1 * self.alpha, -self.gamma2 * self.rho, self.gamma2 * self.meanReversion)
        s = sum(terms)
        if abs(s) <= CASE_TOLERANCE * sum(abs(t) for t in terms):
            return 0.0
        return s

    def isDegenerate(self):
        """True for the alpha = beta = 0 case, where the child flow is inert."""
        return self.alpha == 0.0 and self.beta == 0.0

    def replace(self, **changes):
        """Returns a copy with the passed fields changed. Not validated."""
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)

    def toDict(self):
        """Returns the parameters keyed by their config-file names."""
        return {
            'gamma1': self.gamma1, 'gamma2': self.gamma2, 'rho': self.rho,
            'alpha': self.alpha, 'beta': self.beta, 'lambda': self.lam, 'T': self.T,
            'sigma': self.sigma.describe(), 'x0_mean': self.x0Mean,
            'x0_var': self.x0Var, 'y0': self.y0, 'c0': self.c0,
        }


def validateParams(raw):
    """Checks the standing assumptions and returns the parameters unchanged.

    **Parameters:**

    * raw - a ModelParams instance

    **Returns:**

    The passed instance.

    **Raises:**

    * NonpositiveHorizon - if T <= 0
    * NegativeVariance - if x0_var < 0
    * StandingAssumptionViolated - naming the first failing inequality"""
    if not isinstance(raw, ModelParams):
        raise TypeError("'raw' must be a ModelParams instance.")

    for name in ('gamma1', 'gamma2', 'rho', 'alpha', 'beta', 'lam', 'T',
                 'x0Mean', 'x0Var', 'y0', 'c0'):
        requireNum(name, getattr(raw, name))

    if raw.T <= 0.0:
        raise NonpositiveHorizon("Horizon T must be positive, got %r." % raw.T)
    if raw.x0Var < 0.0:
        raise NegativeVariance("x0_var must be nonnegative, got %r." % raw.x0Var)

    if any(not isFiniteNum(v) or v < 0.0 for v in raw.sigma.values):
        raise StandingAssumptionViolated("sigma(t) >= 0")
    if raw.gamma2 <= 0.0:
        raise StandingAssumptionViolated("gamma2 > 0")
    for name, label in (('gamma1', 'gamma1'), ('rho', 'rho'), ('alpha', 'alpha'), ('lam', 'lambda')):
        if getattr(raw, name) < 0.0:
            raise StandingAssumptionViolated("%s >= 0" % label)

    if not (raw.meanReversion > 0.0 or raw.isDegenerate()):
        raise StandingAssumptionViolated("beta - alpha > 0")
    if raw.a <= 0.0:
        raise StandingAssumptionViolated("gamma2*rho - gamma1*alpha + lambda > 0")
    if raw.aTilde <= 0.0:
        raise StandingAssumptionViolated("gamma2*rho + lambda > 0")

    if raw.isDegenerate():
        log.debug("alpha = beta = 0: child flow equation is inert.")

    return raw


##
## Matrix form.
##

@dataclass(frozen=True, eq=False)
class StateMatrices:
    """Drift, mean-field drift, constant drift, control loading and
    running cost of the matrix-form dynamics. The noise loading depends
    on time through sigma and is evaluated by 'Dvec'."""
    H: np.ndarray
    Hbar: np.ndarray
    G: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    sigma: SigmaSchedule

    def Dvec(self, t):
        """Returns (0, sigma(t), 0)."""
        return np.array([0.0, self.sigma(t), 0.0])


def buildStateMatrices(p):
    """Returns the StateMatrices for validated parameters."""
    b = p.meanReversion
    H = np.array([
        [0.0, 0.0, 0.0],
        [0.0, -p.rho, -p.gamma1 * b],
        [0.0, 0.0, -b],
    ])
    Hbar = np.array([
        [0.0, 0.0, 0.0],
        [-p.alpha * p.gamma1, 0.0, 0.0],
        [-p.alpha, 0.0, 0.0],
    ])
    G = np.array([0.0, p.alpha * p.gamma1 * p.x0Mean, p.alpha * p.x0Mean])
    K = np.array([-1.0, p.gamma2, 0.0])
    Q = np.zeros((3, 3))
    Q[0, 0] = p.lam

    return StateMatrices(H, Hbar, G, K, Q, p.sigma)


##
## Initial law.
##

@dataclass(frozen=True, eq=False)
class InitialLaw:
    """Law of the state just before the initial trade. Only the mean and
    covariance enter the coefficient systems; paths are sampled Gaussian."""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (3,) or cov.shape != (3, 3):
            raise ValueError("InitialLaw needs a 3-vector mean and a 3x3 covariance.")
        if not np.array_equal(cov, cov.T):
            raise ValueError("Initial covariance must be symmetric.")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.min(np.linalg.eigvalsh(cov)) < -COV_TOLERANCE * scale:
            raise NegativeVariance("Initial covariance must be positive semidefinite.")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @staticmethod
    def fromParams(p):
        """Returns the default law: mean (x0_mean, y0, c0), variance only
        on the inventory."""
        cov = np.zeros((3, 3))
        cov[0, 0] = p.x0Var
        return InitialLaw(np.array([p.x0Mean, p.y0, p.c0]), cov)

    def isDeterministic(self):
        return not np.any(self.cov)

    def sqrtCov(self):
        """Returns a matrix L with L L^T = cov, from the eigen decomposition
        (works for singular covariances)."""
        w, v = np.linalg.eigh(self.cov)
        return v * np.sqrt(np.clip(w, 0.0, None))

    def sample(self, normals):
        """Maps an (n, 3) array of standard normals to initial states.
        A deterministic law returns copies of the mean exactly."""
        normals = np.asarray(normals, dtype=float)
        if self.isDeterministic():
            return np.broadcast_to(self.mean, normals.shape).copy()

        return self.mean + normals @ self.sqrtCov().T


##
## Errors.
##

class ModelError(Exception):
    """Base class for errors raised by invalid model parameters."""
    pass


class StandingAssumptionViolated(ModelError):
    """Error raised when a standing assumption fails. The 'inequality'
    attribute holds the failing inequality as text."""

    def __init__(self, inequality):
        super().__init__("Standing assumption violated: %s" % inequality)
        self.inequality = inequality


class NonpositiveHorizon(ModelError):
    """Error raised when the horizon T is not positive."""
    pass


class NegativeVariance(ModelError):
    """Error raised when a variance or covariance is negative."""
    pass
