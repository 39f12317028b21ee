"""fullmatrix.py

Redundant integration of the full 3x3 systems for A and B and the full
3-vector system for D, written with the J shorthands. The reduced solver
never sees these; agreement between the two is a check on both."""

import logging
from dataclasses import dataclass

import numpy as np

from liqtools.riccati import (InvalidGrid, NonFiniteCoefficient, StageInputs, rk4Backward,
                              terminalMatrix)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FullMatrixDrivers:
    """Affine shorthands of the reduced components."""
    JA: float
    JAt: float
    JAh: float
    JB: float
    JBt: float
    JBh: float
    JBr: float
    JD: float
    JDr: float


def fullMatrixDrivers(p, A, B, D):
    """Shorthands from full A, B (3x3) and full D (3-vector)."""
    g1, g2, rho, al, b = p.gamma1, p.gamma2, p.rho, p.alpha, p.meanReversion
    return FullMatrixDrivers(
        JA=g1 * A[0, 0] + g2 * A[0, 2],
        JAt=g1 * A[0, 2] + g2 * A[2, 2],
        JAh=-rho * A[0, 2] + 0.5 * g1 * b,
        JB=g1 * B[0, 0] + g2 * B[0, 2],
        JBt=g1 * B[0, 2] + g2 * B[2, 2],
        JBh=-rho * B[0, 2] + 0.5 * g1 * b,
        JBr=-rho * B[0, 0] + 0.5 * al * g1,
        JD=g1 * D[0] + g2 * D[2],
        JDr=-rho * D[0] - al * g1 * p.x0Mean,
    )


def _sym(x11, x12, x13, x22, x23, x33):
    return np.array([[x11, x12, x13], [x12, x22, x23], [x13, x23, x33]])


def fullARhs(p, A):
    """dA/dt for the full matrix; A is 3x3."""
    g2, rho, b = p.gamma2, p.rho, p.meanReversion
    j = fullMatrixDrivers(p, A, np.zeros((3, 3)), np.zeros(3))
    A11 = A[0, 0]

    drift = _sym(0.0, -rho * A11 / g2, -(b / g2) * j.JA,
                 -rho * (2.0 * A11 - g2) / g2 ** 2, -(b / g2 ** 2) * j.JA + j.JAh / g2,
                 -2.0 * (b / g2) * j.JAt)
    ia = np.array([-rho * A11 - p.lam, -rho * A11 / g2 + rho, j.JAh])
    drift[0, 0] += p.lam

    return -(drift - np.outer(ia, ia) / p.aTilde)


def fullIb(p, j):
    """I^B written with the shorthands."""
    g2, rho, al = p.gamma2, p.rho, p.alpha
    return np.array([
        (al / g2) * j.JB + j.JBr - p.lam,
        (al / g2 ** 2) * j.JB + j.JBr / g2 + (rho * g2 - al * p.gamma1) / g2,
        j.JBh + (al / g2) * j.JBt,
    ])


def fullBRhs(p, B):
    """dB/dt for the full matrix; B is 3x3."""
    g2, rho, al, b = p.gamma2, p.rho, p.alpha, p.meanReversion
    j = fullMatrixDrivers(p, np.zeros((3, 3)), B, np.zeros(3))
    B11 = B[0, 0]

    drift = _sym(-(2.0 * al / g2) * j.JB, -(al / g2 ** 2) * j.JB + j.JBr / g2,
                 -(b / g2) * j.JB - (al / g2) * j.JBt,
                 -rho * (2.0 * B11 - g2) / g2 ** 2, -(b / g2 ** 2) * j.JB + j.JBh / g2,
                 -2.0 * (b / g2) * j.JBt)
    ib = fullIb(p, j)
    drift[0, 0] += p.lam

    return -(drift - np.outer(ib, ib) / p.a)


def fullDRhs(p, D, B):
    """dD/dt for the full vector; D is a 3-vector, B the full 3x3 matrix."""
    g2, al, b, E = p.gamma2, p.alpha, p.meanReversion, p.x0Mean
    j = fullMatrixDrivers(p, np.zeros((3, 3)), B, D)

    drift = np.array([
        2.0 * al * E * j.JB / g2 - al * j.JD / g2,
        2.0 * al * E * j.JB / g2 ** 2 + j.JDr / g2,
        2.0 * al * E * j.JBt / g2 - b * j.JD / g2,
    ])
    twoId = (al / g2) * j.JD + j.JDr

    return -(drift - twoId * fullIb(p, j) / p.a)


def relationResiduals(gamma2, full):
    """Largest violation of the entry relations over an (n, 3, 3) array of
    matrices."""
    r1 = full[:, 0, 0] - gamma2 * full[:, 1, 0]
    r2 = full[:, 0, 1] - gamma2 * full[:, 1, 1] - 0.5
    r3 = full[:, 0, 2] - gamma2 * full[:, 1, 2]
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2)), np.max(np.abs(r3))))


@dataclass(frozen=True, eq=False)
class CrosscheckReport:
    """Sup-norm discrepancies between the full-matrix integration and the
    reconstruction from the reduced systems."""
    entryA: np.ndarray
    entryB: np.ndarray
    entryD: np.ndarray
    terminalDiscrepancy: float
    relationResidual: float
    fullA: np.ndarray
    fullB: np.ndarray
    fullD: np.ndarray

    @property
    def supA(self):
        return float(np.max(self.entryA))

    @property
    def supB(self):
        return float(np.max(self.entryB))

    @property
    def supD(self):
        return float(np.max(self.entryD))

    def passed(self, tol=1e-6):
        return max(self.supA, self.supB, self.supD, self.relationResidual) <= tol


def _integrate(system, rhs, terminal, nodes, inputs=None):
    shape = np.shape(terminal)

    def flat(t, y, u):
        return rhs(y.reshape(shape), u).ravel()

    def blowUp(t):
        return NonFiniteCoefficient(system, float(t))

    values, slopes = rk4Backward(flat, np.ravel(terminal), nodes, inputs=inputs, onNonFinite=blowUp)
    return values.reshape((-1,) + shape), slopes


def crosscheckFullMatrix(p, paths, g=None):
    """Integrates the full systems on the grid of 'paths' and compares
    them with the reduced solution.

    **Parameters:**

    * p - validated ModelParams
    * paths - CoefficientPaths from the reduced solver
    * g - optional TimeGrid; must equal the grid of 'paths'

    **Returns:**

    A CrosscheckReport."""
    if g is not None and g != paths.grid:
        raise InvalidGrid("Cross-check grid must match the reduced solution grid.")
    nodes = paths.grid.nodes

    fullA, _ = _integrate('A (full)', lambda M, u: fullARhs(p, M), terminalMatrix(p.gamma2), nodes)
    fullB, slopesB = _integrate('B (full)', lambda M, u: fullBRhs(p, M), terminalMatrix(p.gamma2), nodes)

    inputs = StageInputs.fromHermite(nodes, fullB.reshape(len(nodes), 9), slopesB)
    fullD, _ = _integrate('D (full)', lambda v, u: fullDRhs(p, v, u.reshape(3, 3)), np.zeros(3),
                          nodes, inputs=inputs)

    refA, refB, refD = paths.A.full(), paths.B.full(), paths.D.full()
    entryA = np.max(np.abs(fullA - refA), axis=0)
    entryB = np.max(np.abs(fullB - refB), axis=0)
    entryD = np.max(np.abs(fullD - refD), axis=0)
    terminal = float(max(np.max(np.abs(fullA[-1] - refA[-1])), np.max(np.abs(fullB[-1] - refB[-1])),
                         np.max(np.abs(fullD[-1] - refD[-1]))))
    relation = max(relationResiduals(p.gamma2, fullA), relationResiduals(p.gamma2, fullB),
                   float(np.max(np.abs(fullD[:, 0] - p.gamma2 * fullD[:, 1]))))

    log.info("Full-matrix cross-check: sup |dA|=%.3g, |dB|=%.3g, |dD|=%.3g", np.max(entryA),
             np.max(entryB), np.max(entryD))

    return CrosscheckReport(entryA, entryB, entryD, terminal, relation, fullA, fullB, fullD)
