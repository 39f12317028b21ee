"""
# Riccati

Backward integration of the value function coefficient systems.

The value function is quadratic in the law of the state,

    V(t, mu) = Var(mu)(A_t) + mean^T B_t mean + D_t^T mean + F_t

and the symmetric 3x3 matrices A, B are pinned down by three free entries
each (11, 13, 33), the rest following from the entry relations

    A11 = gamma2 A21,  A12 = gamma2 A22 + 1/2,  A13 = gamma2 A23

(same for B), with D2 = D1 / gamma2. So the solver integrates three
3-dimensional systems (A is a standard Riccati system, B a fully coupled
one, D is linear given B) and a plain integral for F, since sigma is a
deterministic function of time.

## Conventions

* All systems run backward from T on a uniform TimeGrid with classical RK4
* D consumes B, F consumes A and D; stage values come from cubic Hermite
  interpolation using the right-hand sides as slopes
* Time derivatives of the feedback coefficients are obtained by
  substituting the right-hand sides, never by differencing paths
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from liqtools.python.typehelpers import requireNum, requirePositiveInt
from liqtools.riccati.integrators import StageInputs, cumulativeSimpsonBackward, rk4Backward

log = logging.getLogger(__name__)

DEFAULT_STEPS = 10000

# Column order of the coefficient export.
CSV_HEADER = ('t', 'A11', 'A13', 'A33', 'B11', 'B13', 'B33', 'D1', 'D3', 'F')


##
## Grid.
##

@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t0 = s0 < ... < s_n = T."""
    t0: float
    T: float
    nSteps: int

    def __post_init__(self):
        requireNum('t0', self.t0)
        requireNum('T', self.T)
        try:
            requirePositiveInt('nSteps', self.nSteps, minimum=2)
        except ValueError as e:
            raise InvalidGrid(str(e)) from e
        if not self.T > self.t0:
            raise InvalidGrid("Grid end %r must be after its start %r." % (self.T, self.t0))

    @staticmethod
    def forParams(p, nSteps=DEFAULT_STEPS):
        return TimeGrid(0.0, float(p.T), int(nSteps))

    @property
    def h(self):
        """Step size."""
        return (self.T - self.t0) / self.nSteps

    @cached_property
    def nodes(self):
        return np.linspace(self.t0, self.T, self.nSteps + 1)

    @cached_property
    def midpoints(self):
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def covers(self, t):
        eps = 1e-12 * max(1.0, abs(self.T))
        return self.t0 - eps <= t <= self.T + eps


##
## Reduced right-hand sides. All of these accept arrays whose last axis
## holds the reduced components, so they work on one state or on a whole
## path at once.
##

def iaVector(p, A):
    """I^A from (A11, A13, A33)."""
    A = np.asarray(A, dtype=float)
    A11, A13 = A[..., 0], A[..., 1]
    return np.stack([
        -p.rho * A11 - p.lam,
        -p.rho * A11 / p.gamma2 + p.rho,
        0.5 * p.gamma1 * p.meanReversion - p.rho * A13,
    ], axis=-1)


def ibVector(p, B):
    """I^B from (B11, B13, B33)."""
    B = np.asarray(B, dtype=float)
    B11, B13, B33 = B[..., 0], B[..., 1], B[..., 2]
    g1, g2, al, rho = p.gamma1, p.gamma2, p.alpha, p.rho
    return np.stack([
        (al * g1 - g2 * rho) * B11 / g2 + al * B13 - p.lam + 0.5 * al * g1,
        (al * g1 - g2 * rho) * B11 / g2 ** 2 + al * B13 / g2 + rho - 0.5 * al * g1 / g2,
        0.5 * g1 * p.meanReversion + (g1 * al - g2 * rho) * B13 / g2 + al * B33,
    ], axis=-1)


def idScalar(p, D):
    """I^D from (D1, D3)."""
    D = np.asarray(D, dtype=float)
    D1, D3 = D[..., 0], D[..., 1]
    g1, g2, al = p.gamma1, p.gamma2, p.alpha
    return 0.5 * (-g1 * al * p.x0Mean + (g1 * al - g2 * p.rho) * D1 / g2 + al * D3)


def aRhs(p, A):
    """dA/dt for the reduced A system."""
    A = np.asarray(A, dtype=float)
    A11, A13, A33 = A[..., 0], A[..., 1], A[..., 2]
    ia = iaVector(p, A)
    b, g1, g2, at = p.meanReversion, p.gamma1, p.gamma2, p.aTilde
    return np.stack([
        ia[..., 0] ** 2 / at - p.lam,
        b * (g1 * A11 / g2 + A13) + ia[..., 0] * ia[..., 2] / at,
        2.0 * b * (g1 * A13 / g2 + A33) + ia[..., 2] ** 2 / at,
    ], axis=-1)


def bRhs(p, B):
    """dB/dt for the reduced B system."""
    B = np.asarray(B, dtype=float)
    B11, B13, B33 = B[..., 0], B[..., 1], B[..., 2]
    ib = ibVector(p, B)
    b, g1, g2, al, a = p.meanReversion, p.gamma1, p.gamma2, p.alpha, p.a
    return np.stack([
        2.0 * al * (g1 * B11 / g2 + B13) - p.lam + ib[..., 0] ** 2 / a,
        b * (g1 * B11 / g2 + B13) + al * (g1 * B13 / g2 + B33) + ib[..., 0] * ib[..., 2] / a,
        2.0 * b * (g1 * B13 / g2 + B33) + ib[..., 2] ** 2 / a,
    ], axis=-1)


def dRhs(p, D, B):
    """dD/dt for the linear (D1, D3) system given B."""
    D = np.asarray(D, dtype=float)
    B = np.asarray(B, dtype=float)
    D1, D3 = D[..., 0], D[..., 1]
    B11, B13, B33 = B[..., 0], B[..., 1], B[..., 2]
    ib = ibVector(p, B)
    twoId = 2.0 * idScalar(p, D)
    b, g1, g2, al, a, E = p.meanReversion, p.gamma1, p.gamma2, p.alpha, p.a, p.x0Mean
    return np.stack([
        -2.0 * al * E * (g1 * B11 / g2 + B13) + al * (g1 * D1 / g2 + D3) + twoId * ib[..., 0] / a,
        -2.0 * al * E * (g1 * B13 / g2 + B33) + b * (g1 * D1 / g2 + D3) + twoId * ib[..., 2] / a,
    ], axis=-1)


def fDriver(p, t, A, D):
    """The integrand of F, so that dF/dt = -fDriver."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    A11, D1, D3 = A[..., 0], D[..., 0], D[..., 1]
    g1, g2, al, E = p.gamma1, p.gamma2, p.alpha, p.x0Mean
    sig = p.sigma(t)
    twoId = 2.0 * idScalar(p, D)
    return (sig ** 2 * (2.0 * A11 - g2) / (2.0 * g2 ** 2)
            + al * E * (g1 * D1 / g2 + D3)
            - twoId ** 2 / (4.0 * p.a))


##
## Reconstruction.
##

def reconstructSymmetric(gamma2, triple):
    """Builds full symmetric 3x3 matrices from (x11, x13, x33) using the
    entry relations. Works on a single triple or an (n, 3) array."""
    triple = np.asarray(triple, dtype=float)
    x11, x13, x33 = triple[..., 0], triple[..., 1], triple[..., 2]
    x12 = x11 / gamma2
    x22 = (2.0 * x11 - gamma2) / (2.0 * gamma2 ** 2)
    x23 = x13 / gamma2

    out = np.empty(triple.shape[:-1] + (3, 3))
    out[..., 0, 0] = x11
    out[..., 0, 1] = out[..., 1, 0] = x12
    out[..., 0, 2] = out[..., 2, 0] = x13
    out[..., 1, 1] = x22
    out[..., 1, 2] = out[..., 2, 1] = x23
    out[..., 2, 2] = x33

    return out


def reconstructVector(gamma2, pair):
    """Builds (D1, D1/gamma2, D3) from (D1, D3)."""
    pair = np.asarray(pair, dtype=float)
    return np.stack([pair[..., 0], pair[..., 0] / gamma2, pair[..., 1]], axis=-1)


def terminalMatrix(gamma2):
    """[[gamma2/2, 1/2, 0], [1/2, 0, 0], [0, 0, 0]]"""
    return reconstructSymmetric(gamma2, [0.5 * gamma2, 0.0, 0.0])


##
## Paths.
##

@dataclass(frozen=True, eq=False)
class SystemPath:
    """Node values of one coefficient system and the right-hand side at
    each node. 'system' is one of 'A', 'B', 'D', 'F'."""
    system: str
    grid: TimeGrid
    gamma2: float
    values: np.ndarray
    slopes: np.ndarray

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.values, self.slopes, axis=0)

    def at(self, t):
        """Interpolated value at t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        lo, hi = np.min(t), np.max(t)
        if not (self.grid.covers(lo) and self.grid.covers(hi)):
            raise OutOfRange(float(lo if not self.grid.covers(lo) else hi))

        return self._spline(np.clip(t, self.grid.t0, self.grid.T))

    def full(self):
        """Full matrices (A, B) or vectors (D) at every node."""
        if self.system in ('A', 'B'):
            return reconstructSymmetric(self.gamma2, self.values)
        if self.system == 'D':
            return reconstructVector(self.gamma2, self.values)

        return self.values


@dataclass(frozen=True, eq=False)
class CoefficientPaths:
    """The four solved systems on a common grid."""
    params: object
    grid: TimeGrid
    A: SystemPath
    B: SystemPath
    D: SystemPath
    F: SystemPath

    def table(self):
        """Returns the export array, one row per node, columns CSV_HEADER."""
        return np.column_stack([self.grid.nodes, self.A.values, self.B.values,
                                self.D.values, self.F.values])

    def interpolate(self, t):
        """Reduced (A, B, D, F) at t by Hermite interpolation."""
        return self.A.at(t), self.B.at(t), self.D.at(t), self.F.at(t)

    def fullMatrices(self):
        """Full A, B matrices and D vectors at every node."""
        return self.A.full(), self.B.full(), self.D.full()

    def b11Positive(self):
        """Monotonicity guard: True if B11 > 0 on the whole grid."""
        return bool(np.all(self.B.values[:, 0] > 0.0))


def _blowUp(system):
    def make(t):
        return NonFiniteCoefficient(system, float(t))
    return make


def solveA(p, g):
    """Integrates the A system backward from (gamma2/2, 0, 0).

    **Parameters:**

    * p - validated ModelParams
    * g - TimeGrid

    **Returns:**

    A SystemPath; 'full()' gives the reconstructed matrices."""
    values, slopes = rk4Backward(lambda t, y, u: aRhs(p, y), [0.5 * p.gamma2, 0.0, 0.0],
                                 g.nodes, onNonFinite=_blowUp('A'))
    log.debug("A system solved on %d steps, A11(t0)=%.10g", g.nSteps, values[0, 0])

    return SystemPath('A', g, p.gamma2, values, slopes)


def solveB(p, g):
    """Integrates the coupled B system backward from (gamma2/2, 0, 0).
    Raises NonFiniteCoefficient on blow-up."""
    values, slopes = rk4Backward(lambda t, y, u: bRhs(p, y), [0.5 * p.gamma2, 0.0, 0.0],
                                 g.nodes, onNonFinite=_blowUp('B'))
    log.debug("B system solved on %d steps, B11(t0)=%.10g", g.nSteps, values[0, 0])

    return SystemPath('B', g, p.gamma2, values, slopes)


def solveD(p, g, B):
    """Integrates the linear D system backward from 0, reading B at the
    stage points."""
    if B.grid != g:
        raise InvalidGrid("D must be solved on the grid B was solved on.")

    inputs = StageInputs.fromHermite(g.nodes, B.values, B.slopes)
    values, slopes = rk4Backward(lambda t, y, u: dRhs(p, y, u), [0.0, 0.0],
                                 g.nodes, inputs=inputs, onNonFinite=_blowUp('D'))

    return SystemPath('D', g, p.gamma2, values, slopes)


def solveF(p, g, A, D):
    """F(t) as the composite Simpson integral of the driver over [t, T]."""
    if A.grid != g or D.grid != g:
        raise InvalidGrid("F must be solved on the grid A and D were solved on.")

    aMid = StageInputs.fromHermite(g.nodes, A.values, A.slopes).atMidpoints
    dMid = StageInputs.fromHermite(g.nodes, D.values, D.slopes).atMidpoints
    atNodes = fDriver(p, g.nodes, A.values, D.values)
    atMid = fDriver(p, g.midpoints, aMid, dMid)

    values = cumulativeSimpsonBackward(atNodes, atMid, g.nodes)
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values))
        raise NonFiniteCoefficient('F', float(g.nodes[bad[-1]]))

    return SystemPath('F', g, p.gamma2, values, -atNodes)


def solveCoefficients(p, g):
    """Solves A, B, D and F on one grid."""
    A = solveA(p, g)
    B = solveB(p, g)
    D = solveD(p, g, B)
    F = solveF(p, g, A, D)

    return CoefficientPaths(p, g, A, B, D, F)


##
## Feedback coefficients.
##

@dataclass(frozen=True, eq=False)
class FeedbackCoefficients:
    """I^A, I^B, I^D at a time (or at every node when the fields are
    arrays), their time derivatives and the two denominators."""
    t: object
    IA: np.ndarray
    IB: np.ndarray
    ID: object
    aTilde: float
    a: float
    dIA: np.ndarray
    dIB: np.ndarray
    dID: object


def feedbackDerivatives(p, dA, dB, dD):
    """Time derivatives of I^A, I^B, I^D given dA/dt, dB/dt, dD/dt."""
    g1, g2, al, rho = p.gamma1, p.gamma2, p.alpha, p.rho
    dA11, dA13 = dA[..., 0], dA[..., 1]
    dB11, dB13, dB33 = dB[..., 0], dB[..., 1], dB[..., 2]
    dD1, dD3 = dD[..., 0], dD[..., 1]
    dIA = np.stack([-rho * dA11, -rho * dA11 / g2, -rho * dA13], axis=-1)
    dIB = np.stack([
        (al * g1 - g2 * rho) * dB11 / g2 + al * dB13,
        (al * g1 - g2 * rho) * dB11 / g2 ** 2 + al * dB13 / g2,
        (g1 * al - g2 * rho) * dB13 / g2 + al * dB33,
    ], axis=-1)
    dID = 0.5 * ((g1 * al - g2 * rho) * dD1 / g2 + al * dD3)

    return dIA, dIB, dID


def _feedbackFrom(p, t, A, B, D):
    dA, dB, dD = aRhs(p, A), bRhs(p, B), dRhs(p, D, B)
    dIA, dIB, dID = feedbackDerivatives(p, dA, dB, dD)

    return FeedbackCoefficients(t, iaVector(p, A), ibVector(p, B), idScalar(p, D),
                                p.aTilde, p.a, dIA, dIB, dID)


def feedbackCoeffs(p, paths, t):
    """Evaluates the feedback coefficients and their derivatives at t,
    interpolating the coefficient paths.

    **Raises:**

    * OutOfRange - if t is outside the grid"""
    t = float(t)
    if not paths.grid.covers(t):
        raise OutOfRange(t)

    return _feedbackFrom(p, t, paths.A.at(t), paths.B.at(t), paths.D.at(t))


def feedbackOnGrid(paths, nodes=None):
    """Feedback coefficients at every node of the coefficient grid, or at
    the passed times (interpolated)."""
    p = paths.params
    if nodes is None:
        return _feedbackFrom(p, paths.grid.nodes, paths.A.values, paths.B.values, paths.D.values)

    nodes = np.asarray(nodes, dtype=float)
    return _feedbackFrom(p, nodes, paths.A.at(nodes), paths.B.at(nodes), paths.D.at(nodes))


##
## Errors.
##

class InvalidGrid(ValueError):
    """Error raised for a grid with fewer than two steps or mismatched
    grids."""
    pass


class NonFiniteCoefficient(Exception):
    """Error raised when a coefficient system stops being finite. 'system'
    names the system and 'time' estimates the blow-up time."""

    def __init__(self, system, time):
        super().__init__("Coefficient system %s is not finite near t=%.6g (blow-up)." % (system, time))
        self.system = system
        self.time = time


class OutOfRange(Exception):
    """Error raised when a time outside the solved grid is requested."""

    def __init__(self, time):
        super().__init__("Time %r is outside the solved grid." % time)
        self.time = time


from liqtools.riccati.fullmatrix import FullMatrixDrivers, CrosscheckReport, crosscheckFullMatrix  # noqa: E402
