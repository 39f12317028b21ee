"""
# Oracle

Discrete-time dynamic program whose step-to-zero limit defines the
continuous coefficient systems. It shares no code with the continuous
solvers beyond the parameter types, so agreement between the two is a
real check.

With N + 1 trading times 0, D, ..., N D the pre-trade state moves as

    S_{n+1} = A S_n + Abar E[S_n] + B xi_n + Bbar E[xi_n] + C + Dvec eps_{n+1}

and the value function V_n(mu) = Var(mu)(A_n) + mean^T B_n mean + D_n^T mean
+ F_n is computed by backward recursion from forced liquidation at step N.

## Conventions

* Only the scalars a~_n and a_n are ever inverted
* Sequences carry the index n as their first axis; the feedback
  coefficients exist for n < N only
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from liqtools.model import InitialLaw
from liqtools.python.typehelpers import requirePositiveInt
from liqtools.riccati import TimeGrid, feedbackOnGrid, solveCoefficients
from liqtools.simulate import solveMeanPath

log = logging.getLogger(__name__)

# Resolution of the continuous reference in convergence reports.
REFERENCE_STEPS = 10000

TABLE_HEADER = ('n', 't', 'A11', 'A13', 'A33', 'B11', 'B13', 'B33', 'D1', 'D3', 'F')
ERROR_HEADER = ('N', 'errA', 'errB', 'errD', 'errF')
DIAGNOSTIC_HEADER = ('N', 'errIA', 'errMean')


##
## Model.
##

@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Matrices of the discrete state recursion for one step size."""
    params: object
    N: int
    Delta: float
    A: np.ndarray
    Abar: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    C: np.ndarray
    L: np.ndarray
    R: float
    Q: np.ndarray

    def Dvec(self, n):
        """Noise loading at step n."""
        return np.array([0.0, float(self.params.sigma(n * self.Delta)), 0.0])

    @property
    def times(self):
        return np.arange(self.N + 1) * self.Delta


def buildDiscreteModel(p, N):
    """Builds the discrete matrices for step D = T / N."""
    requirePositiveInt('N', N, minimum=2)
    d = p.T / N
    b = p.meanReversion
    g1, g2 = p.gamma1, p.gamma2

    A = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0 - d * p.rho, -d * g1 * b],
        [0.0, 0.0, 1.0 - b * d],
    ])
    Abar = np.array([
        [0.0, 0.0, 0.0],
        [-p.alpha * d * g1, 0.0, 0.0],
        [-p.alpha * d, 0.0, 0.0],
    ])
    B = np.array([-1.0, (1.0 - d * p.rho) * g2, 0.0])
    Bbar = np.array([0.0, p.alpha * d * g1, p.alpha * d])
    C = np.array([0.0, p.alpha * d * g1 * p.x0Mean, p.alpha * d * p.x0Mean])
    Q = np.zeros((3, 3))
    Q[0, 0] = d * p.lam

    return DiscreteModel(p, int(N), d, A, Abar, B, Bbar, C, np.array([0.0, 1.0, 0.0]), 0.5 * g2, Q)


##
## Backward recursion.
##

@dataclass(frozen=True, eq=False)
class DiscreteDPResult:
    """Backward sequences n = 0..N and the feedback coefficients n < N."""
    model: DiscreteModel
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    F: np.ndarray
    aTilde: np.ndarray
    a: np.ndarray
    IA: np.ndarray
    IB: np.ndarray
    ID: np.ndarray

    def relationResiduals(self):
        """Entry relations of A_n, B_n, D_n, one row per n:
        three for A, three for B, one for D. All should vanish."""
        g2 = self.model.params.gamma2
        ld = self.model.params.lam * self.model.Delta

        def rel(X):
            return np.column_stack([
                -X[:, 0, 0] + g2 * X[:, 1, 0] + ld,
                -X[:, 0, 1] + g2 * X[:, 1, 1] + 0.5,
                -X[:, 0, 2] + g2 * X[:, 1, 2],
            ])

        return np.column_stack([rel(self.A), rel(self.B), -self.D[:, 0] + g2 * self.D[:, 1]])

    def maxRelationResidual(self):
        return float(np.max(np.abs(self.relationResiduals())))

    def table(self):
        """Export array with columns TABLE_HEADER."""
        n = np.arange(self.model.N + 1)
        return np.column_stack([
            n, self.model.times,
            self.A[:, 0, 0], self.A[:, 0, 2], self.A[:, 2, 2],
            self.B[:, 0, 0], self.B[:, 0, 2], self.B[:, 2, 2],
            self.D[:, 0], self.D[:, 2], self.F,
        ])


def terminalData(model):
    """Coefficients of V_N for forced liquidation xi_N = X: the cost
    Y X + (gamma2/2 + D lambda) X^2 as a quadratic form."""
    m = np.zeros((3, 3))
    m[0, 0] = 0.5 * model.params.gamma2 + model.Delta * model.params.lam
    m[0, 1] = m[1, 0] = 0.5

    return m, m.copy(), np.zeros(3), 0.0


def runDp(p, N):
    """Runs the backward recursion for D = T / N.

    **Parameters:**

    * p - validated ModelParams
    * N - number of steps, at least 2

    **Returns:**

    A DiscreteDPResult.

    **Raises:**

    * SingularDenominator - if a~_n or a_n is not positive"""
    m = buildDiscreteModel(p, N)
    AA = m.A + m.Abar
    BB = m.B + m.Bbar

    A = np.empty((N + 1, 3, 3))
    B = np.empty((N + 1, 3, 3))
    D = np.empty((N + 1, 3))
    F = np.empty(N + 1)
    aTilde = np.empty(N)
    a = np.empty(N)
    IA = np.empty((N, 3))
    IB = np.empty((N, 3))
    ID = np.empty(N)

    A[N], B[N], D[N], F[N] = terminalData(m)

    for n in range(N - 1, -1, -1):
        An, Bn, Dn = A[n + 1], B[n + 1], D[n + 1]

        aTilde[n] = m.R + m.B @ An @ m.B
        a[n] = m.R + BB @ Bn @ BB
        if not aTilde[n] > 0.0:
            raise SingularDenominator(n, 'aTilde')
        if not a[n] > 0.0:
            raise SingularDenominator(n, 'a')

        IA[n] = 0.5 * m.L + m.B @ An @ m.A
        IB[n] = 0.5 * m.L + BB @ Bn @ AA
        ID[n] = m.C @ Bn @ BB + 0.5 * Dn @ BB

        A[n] = m.Q + m.A.T @ An @ m.A - np.outer(IA[n], IA[n]) / aTilde[n]
        B[n] = m.Q + AA.T @ Bn @ AA - np.outer(IB[n], IB[n]) / a[n]
        D[n] = -2.0 * ID[n] * IB[n] / a[n] + (2.0 * m.C @ Bn + Dn) @ AA
        dv = m.Dvec(n)
        F[n] = -ID[n] ** 2 / a[n] + m.Delta * dv @ An @ dv + m.C @ Bn @ m.C + Dn @ m.C + F[n + 1]

    log.debug("Discrete recursion done for N=%d, B11(0)=%.10g", N, B[0, 0, 0])

    return DiscreteDPResult(m, A, B, D, F, aTilde, a, IA, IB, ID)


def discreteControl(result, n, state, mean):
    """Optimal trade at step n for a pre-trade state and the pre-trade
    mean: -(I^A_n/a~_n)(state - mean) - (I^B_n mean + I^D_n)/a_n."""
    if not 0 <= n < result.model.N:
        raise IndexError("Step %d outside 0..%d." % (n, result.model.N - 1))
    state = np.asarray(state, dtype=float)
    mean = np.asarray(mean, dtype=float)

    return float(-(result.IA[n] @ (state - mean)) / result.aTilde[n]
                 - (result.IB[n] @ mean + result.ID[n]) / result.a[n])


def discreteMeanPath(result, law):
    """Propagates the exact mean of the controlled chain.

    **Returns:**

    (pre-trade means, shape (N + 1, 3); trades, shape (N + 1,)) where the
    last trade is the forced liquidation."""
    m = result.model
    AA = m.A + m.Abar
    BB = m.B + m.Bbar

    E = np.empty((m.N + 1, 3))
    xi = np.empty(m.N + 1)
    E[0] = law.mean
    for n in range(m.N):
        xi[n] = discreteControl(result, n, E[n], E[n])
        E[n + 1] = AA @ E[n] + BB * xi[n] + m.C
    xi[m.N] = E[m.N, 0]

    return E, xi


##
## Convergence.
##

@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    errA: float
    errB: float
    errD: float
    errF: float
    errIA: float
    errMean: float
    maxRelationResidual: float


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    rows: list

    def errorTable(self):
        return np.array([[r.N, r.errA, r.errB, r.errD, r.errF] for r in self.rows], dtype=float)

    def diagnosticTable(self):
        return np.array([[r.N, r.errIA, r.errMean] for r in self.rows], dtype=float)

    def orders(self, which='errB'):
        """Empirical orders log(e1/e2)/log(N2/N1) between consecutive rows."""
        out = []
        for r1, r2 in zip(self.rows, self.rows[1:]):
            e1, e2 = getattr(r1, which), getattr(r2, which)
            if e1 > 0.0 and e2 > 0.0:
                out.append(float(np.log(e1 / e2) / np.log(r2.N / r1.N)))
            else:
                out.append(float('nan'))
        return out


def _compareOne(p, N, coeffs, meanX, law):
    result = runDp(p, N)
    t = result.model.times

    def sup(discrete, continuous):
        return float(np.max(np.abs(discrete - continuous)))

    A = coeffs.A.at(t)
    B = coeffs.B.at(t)
    D = coeffs.D.at(t)
    F = coeffs.F.at(t)

    errA = sup(result.A[:, [0, 0, 2], [0, 2, 2]], A)
    errB = sup(result.B[:, [0, 0, 2], [0, 2, 2]], B)
    errD = sup(result.D[:, [0, 2]], D)
    errF = sup(result.F, F)

    fb = feedbackOnGrid(coeffs, t[:-1])
    errIA = sup(result.IA / result.model.Delta, fb.IA)

    E, xi = discreteMeanPath(result, law)
    after = E[:-1, 0] - xi[:-1]
    errMean = sup(after, meanX(t[:-1]))

    log.info("N=%d: errA=%.3g errB=%.3g errD=%.3g errF=%.3g errIA=%.3g errMean=%.3g",
             N, errA, errB, errD, errF, errIA, errMean)

    return ConvergenceRow(N, errA, errB, errD, errF, errIA, errMean, result.maxRelationResidual())


def convergenceReport(p, nList, referenceSteps=REFERENCE_STEPS, law=None, workers=1):
    """Compares the discrete recursion with a fine continuous solve for
    each N in 'nList'.

    **Parameters:**

    * p - validated ModelParams
    * nList - increasing step counts
    * referenceSteps - resolution of the continuous reference
    * law - InitialLaw for the mean path comparison (default from p)
    * workers - N values run concurrently on this many threads

    **Returns:**

    A ConvergenceReport with one row per N."""
    law = law or InitialLaw.fromParams(p)
    g = TimeGrid.forParams(p, referenceSteps)
    coeffs = solveCoefficients(p, g)
    mean = solveMeanPath(p, coeffs, law)

    def meanX(t):
        return np.interp(t, g.nodes, mean.X)

    nList = [int(n) for n in nList]
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        rows = list(pool.map(lambda n: _compareOne(p, n, coeffs, meanX, law), nList))

    return ConvergenceReport(rows)


##
## Errors.
##

class SingularDenominator(Exception):
    """Error raised when a discrete denominator is not positive."""

    def __init__(self, n, which):
        super().__init__("Discrete denominator %s is not positive at step %d." % (which, n))
        self.n = n
        self.which = which
