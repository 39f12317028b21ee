"""
# Cost

Monte-Carlo evaluation of the execution cost

    J = E[ int Y_{s-} dZ_s + gamma2/2 d[Z]_s + sigma_s d[Z, W]_s + int lambda X_s^2 ds ]

for simulated ensembles, the closed-form value function and the check
that J splits into two complete squares plus the value function.

## Conventions

* Stochastic integrals are left-point sums; the two block trades enter
  as exact atoms priced at the pre-jump impact
* The continuous part of [Z] is int zeta^2 ds from the recorded diffusion
  loading, [Z, W] is int zeta ds
* The risk integral is a trapezoid over the nodes, node N holding X(T-)
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from liqtools.riccati import feedbackOnGrid, reconstructSymmetric, reconstructVector
from liqtools.simulate import simulateAffine

log = logging.getLogger(__name__)

REPORT_HEADER = ('strategy_id', 'J_mean', 'J_se', 'S_A', 'S_B', 'V', 'residual', 'residual_se')


def _meanAndError(values):
    """Mean and standard error of per-path values; the error is exactly 0
    when all values coincide."""
    values = np.asarray(values, dtype=float)
    m = float(np.mean(values))
    if values.size < 2 or np.ptp(values) == 0.0:
        return m, 0.0

    return m, float(np.std(values, ddof=1) / np.sqrt(values.size))


##
## Ledger.
##

@dataclass(frozen=True, eq=False)
class CostLedger:
    """Per-path cost components of an ensemble."""
    label: str
    trading: np.ndarray
    quadraticVariation: np.ndarray
    covariation: np.ndarray
    risk: np.ndarray
    terminalAtom: np.ndarray

    @property
    def total(self):
        return self.trading + self.quadraticVariation + self.covariation + self.risk

    @property
    def mean(self):
        return _meanAndError(self.total)[0]

    @property
    def standardError(self):
        return _meanAndError(self.total)[1]

    def isFinite(self):
        """Empirical admissibility flag: every path has a finite cost."""
        return bool(np.all(np.isfinite(self.total)))

    def withoutTerminalBlock(self):
        """Per-path totals with the terminal block atom taken out."""
        return self.total - self.terminalAtom

    def components(self):
        """Ensemble means of the four components, by name."""
        return {
            'trading': float(np.mean(self.trading)),
            'quadraticVariation': float(np.mean(self.quadraticVariation)),
            'covariation': float(np.mean(self.covariation)),
            'risk': float(np.mean(self.risk)),
        }


def evaluateCost(ensemble, p):
    """Prices every path of an ensemble.

    **Parameters:**

    * ensemble - PathEnsemble
    * p - the ModelParams the ensemble was simulated with

    **Returns:**

    A CostLedger.

    **Raises:**

    * MissingDiffusionRecord - if the ensemble carries no diffusion loading"""
    grid = ensemble.grid
    zeta = ensemble.diffusionLoading
    if zeta is None or np.shape(zeta) != (grid.nSteps + 1,):
        raise MissingDiffusionRecord("Ensemble '%s' has no diffusion loading record." % ensemble.label)

    h = grid.h
    zeta = np.asarray(zeta, dtype=float)[:-1]
    sig = np.asarray(ensemble.sigmaNodes, dtype=float)[:-1]
    gamma2 = p.gamma2

    dZ = np.diff(ensemble.Z, axis=1)
    yMinus = ensemble.stateMinus[:, 1]
    yT = ensemble.Y[:, -1]

    terminalAtom = yT * ensemble.jumpT + 0.5 * gamma2 * ensemble.jumpT ** 2
    trading = yMinus * ensemble.jump0 + np.sum(ensemble.Y[:, :-1] * dZ, axis=1) + yT * ensemble.jumpT
    continuousQv = float(np.sum(zeta ** 2) * h)
    quadraticVariation = 0.5 * gamma2 * (continuousQv + ensemble.jump0 ** 2 + ensemble.jumpT ** 2)
    covariation = np.full(ensemble.nPaths, float(np.sum(sig * zeta) * h))
    risk = p.lam * trapezoid(ensemble.X ** 2, dx=h, axis=1)

    ledger = CostLedger(ensemble.label, trading, quadraticVariation, covariation, risk, terminalAtom)
    if not ledger.isFinite():
        log.warning("Strategy '%s' has non-finite cost on some paths; treated as inadmissible.",
                    ensemble.label)

    return ledger


##
## Value function.
##

@dataclass(frozen=True)
class ValueReport:
    """The value function and its four summands."""
    t: float
    varianceTerm: float
    meanTerm: float
    linearTerm: float
    constantTerm: float

    @property
    def value(self):
        return self.varianceTerm + self.meanTerm + self.linearTerm + self.constantTerm


def valueFunction(coeffs, law, t):
    """Evaluates Var(mu)(A_t) + mean^T B_t mean + D_t^T mean + F_t.

    **Raises:**

    * OutOfRange - if t is outside the coefficient grid"""
    gamma2 = coeffs.params.gamma2
    A = reconstructSymmetric(gamma2, coeffs.A.at(t))
    B = reconstructSymmetric(gamma2, coeffs.B.at(t))
    D = reconstructVector(gamma2, coeffs.D.at(t))
    F = float(coeffs.F.at(t))
    mu = law.mean

    return ValueReport(float(t), float(np.trace(A @ law.cov)), float(mu @ B @ mu), float(D @ mu), F)


##
## Complete squares.
##

@dataclass(frozen=True, eq=False)
class SquareDecomposition:
    """Monte-Carlo cost against the two complete squares plus the value
    function, on shared paths."""
    strategyId: str
    ledger: CostLedger
    squareA: np.ndarray
    squareB: float
    value: ValueReport

    @property
    def jMean(self):
        return self.ledger.mean

    @property
    def jStandardError(self):
        return self.ledger.standardError

    @property
    def sA(self):
        return float(np.mean(self.squareA))

    @property
    def sB(self):
        return self.squareB

    @property
    def V(self):
        return self.value.value

    def residuals(self):
        """Per-path J - S_A - S_B - V."""
        return self.ledger.total - self.squareA - self.squareB - self.V

    @property
    def residual(self):
        return _meanAndError(self.residuals())[0]

    @property
    def residualStandardError(self):
        return _meanAndError(self.residuals())[1]

    def csvRow(self):
        return [self.strategyId, self.jMean, self.jStandardError, self.sA, self.sB, self.V,
                self.residual, self.residualStandardError]


def squareTerms(ensemble, coeffs):
    """Per-path int (I^A (S - E))^2 / a~ ds and the deterministic
    int (I^B E + I^D)^2 / a ds over the ensemble grid."""
    grid = ensemble.grid
    fb = feedbackOnGrid(coeffs) if grid == coeffs.grid else feedbackOnGrid(coeffs, grid.nodes)

    dev = ensemble.deviation()
    devResidual = np.einsum('pij,ij->pi', dev, fb.IA)
    meanResidual = np.einsum('ij,ij->i', fb.IB, ensemble.mean.E) + fb.ID

    squareA = trapezoid(devResidual ** 2 / fb.aTilde, dx=grid.h, axis=1)
    squareB = float(trapezoid(meanResidual ** 2 / fb.a, dx=grid.h))

    return squareA, squareB


def verifySquareDecomposition(p, coeffs, spec, law, nPaths, seed, workers=1, strategyId=None):
    """Simulates 'spec' and compares its cost with the squares plus the
    value function at the grid start.

    **Parameters:**

    * p - validated ModelParams
    * coeffs - CoefficientPaths covering the spec grid
    * spec - AffineStrategySpec with its terminal block on
    * law - InitialLaw
    * nPaths, seed - ensemble size and run seed; equal seeds give paired
      comparisons across specs

    **Returns:**

    A SquareDecomposition."""
    if not spec.terminalBlock:
        raise ValueError("The decomposition needs a strategy that closes its position at T.")

    ensemble = simulateAffine(p, spec, law, nPaths, seed, workers=workers)
    ledger = evaluateCost(ensemble, p)
    squareA, squareB = squareTerms(ensemble, coeffs)
    value = valueFunction(coeffs, law, spec.grid.t0)

    out = SquareDecomposition(strategyId or spec.label, ledger, squareA, squareB, value)
    log.info("%s: J=%.8g (se %.2g) S_A=%.3g S_B=%.3g V=%.8g residual=%.3g",
             out.strategyId, out.jMean, out.jStandardError, out.sA, out.sB, out.V, out.residual)

    return out


##
## Errors.
##

class MissingDiffusionRecord(Exception):
    """Error raised when an ensemble lacks the diffusion loading needed
    for the bracket terms."""
    pass
