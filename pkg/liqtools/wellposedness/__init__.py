"""
# Well-posedness

Executable version of the existence argument for the coupled B system.

Writing P = [[B11, B13], [B13, B33]] the B system is the 2x2 matrix
Riccati equation

    dP/dt = P N2 N0 N2^T P + N1 P + P N1^T - M,    P(T) = Gterm

whose driver M is indefinite. Shifting P by the constant matrix

    LambdaTilde = Lambda [[alpha^2, alpha b], [alpha b, b^2]],  b = beta - alpha

turns the driver into Mtilde; if Mtilde is positive semidefinite and
the shifted terminal value positive definite, the shifted equation has
a global solution and so does the B system. This module picks Lambda
the way the existence argument does (by cases on the sign of
gamma1 alpha - gamma2 rho + gamma2 b) and certifies the result from the
eigenvalues of Mtilde.

## Non-goals

* Replaying the argument symbolically
* An analytic alpha threshold (the command line bisects for one)
"""

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TOL_PSD = 1e-10

GRID_LAMBDAS = np.logspace(-6.0, 6.0, 200)

CASE_TAGS = ('Case1.1', 'Case1.2', 'Case2', 'RiskNeutralRemark', 'GridFallback', 'Manual')


@dataclass(frozen=True, eq=False)
class MatrixRiccatiForm:
    """Coefficients of the 2x2 matrix Riccati form of the B system."""
    N0: float
    N1: np.ndarray
    N2: np.ndarray
    M: np.ndarray
    Gterm: np.ndarray


@dataclass(frozen=True, eq=False)
class WellposednessCertificate:
    """Outcome of certifying one shift constant."""
    caseTag: str
    Lambda: float
    LambdaTilde: np.ndarray
    Mtilde: np.ndarray
    eigenvalues: tuple
    fVal: float
    gVal: float
    detMtilde: float
    passed: bool

    @property
    def minEigenvalue(self):
        return min(self.eigenvalues)

    def csvRow(self):
        """Row matching CERTIFICATE_HEADER."""
        return (self.caseTag, self.Lambda, self.Mtilde[0, 0], self.Mtilde[0, 1], self.Mtilde[1, 1],
                self.eigenvalues[0], self.eigenvalues[1], self.detMtilde, self.passed)

    def summary(self):
        """Dictionary for the run manifest."""
        return {'case': self.caseTag, 'lambda': self.Lambda, 'minEigenvalue': self.minEigenvalue,
                'det': self.detMtilde, 'passed': self.passed}


CERTIFICATE_HEADER = ('case', 'lambda', 'mtilde11', 'mtilde12', 'mtilde22', 'eig1', 'eig2', 'det', 'passed')


def buildMatrixRiccati(p):
    """Returns the MatrixRiccatiForm for validated parameters."""
    g1, g2, rho, al, lam, a, b = p.gamma1, p.gamma2, p.rho, p.alpha, p.lam, p.a, p.meanReversion
    k = g1 * al - g2 * rho

    N0 = 1.0 / (g2 ** 2 * a)
    N1 = np.array([
        [g1 * al / g2 + k * (g1 * al - 2.0 * lam) / (2.0 * g2 * a),
         al + al * (g1 * al - 2.0 * lam) / (2.0 * a)],
        [g1 * b / g2 + k * g1 * b / (2.0 * g2 * a),
         b + g1 * al * b / (2.0 * a)],
    ])
    N2 = np.array([k, g2 * al])
    m12 = g1 * b * (g1 * al - 2.0 * lam) / (4.0 * a)
    M = -np.array([
        [(g1 ** 2 * al ** 2 - 4.0 * lam * g2 * rho) / (4.0 * a), m12],
        [m12, g1 ** 2 * b ** 2 / (4.0 * a)],
    ])
    Gterm = np.array([[0.5 * g2, 0.0], [0.0, 0.0]])

    return MatrixRiccatiForm(N0, N1, N2, M, Gterm)


def riccatiMatrixRhs(form, P):
    """dP/dt of the matrix form, for a symmetric 2x2 P."""
    quad = form.N0 * np.outer(P @ form.N2, P @ form.N2)
    return quad + form.N1 @ P + P @ form.N1.T - form.M


def lambdaTilde(p, Lambda):
    al, b = p.alpha, p.meanReversion
    return Lambda * np.array([[al ** 2, al * b], [al * b, b ** 2]])


def evalFg(p, Lambda):
    """Evaluates f(Lambda) and g(Lambda).

    For lambda > 0, f is the quadratic whose sign governs the lower right
    entry of Mtilde and g the linear correction in its upper left entry.
    For lambda = 0 the risk-neutral form of f is used and g is 0; that f
    is not Mtilde22 / (beta - alpha)^2, and certificates always take their
    eigenvalues from the exact entries.

    **Returns:**

    The tuple (f, g)."""
    q, lin, c = _fCoefficients(p)
    f = q * Lambda ** 2 + lin * Lambda + c
    if p.lam == 0.0:
        return float(f), 0.0

    g = p.lam * p.caseQuantity / (p.gamma2 * p.a) * Lambda
    return float(f), float(g)


def _fCoefficients(p):
    """(quadratic, linear, constant) coefficients of f.

    For lambda > 0, f (beta - alpha)^2 is exactly the lower right entry of
    Mtilde. The risk-neutral f has the same linear part, half the quadratic
    part and twice the constant, so there Mtilde22 / (beta - alpha)^2 is
    2q L^2 + l L + c / 2 in its coefficients (q, l, c)."""
    g1, g2, rho, al, b = p.gamma1, p.gamma2, p.rho, p.alpha, p.meanReversion
    s = p.caseQuantity
    if p.lam == 0.0:
        d = g2 * rho - g1 * al
        return (-al ** 2 * s ** 2 / (2.0 * g2 ** 2 * d),
                2.0 * b + g1 * al / g2 + g1 * al * b / d,
                -g1 ** 2 / (2.0 * d))

    a = p.a
    k = g1 * al - g2 * rho
    return (-al ** 2 * s ** 2 / (g2 ** 2 * a),
            2.0 * g1 * al / g2 + g1 * al * k / (g2 * a) + 2.0 * b + g1 * al * b / a,
            -g1 ** 2 / (4.0 * a))


def mtildeEntries(p, Lambda):
    """Mtilde from its entry formulas, in terms of the entries
    (l1, l2; l2, l3) of LambdaTilde."""
    g1, g2, rho, al, lam, a, b = p.gamma1, p.gamma2, p.rho, p.alpha, p.lam, p.a, p.meanReversion
    k = g1 * al - g2 * rho
    l1, l2, l3 = Lambda * al ** 2, Lambda * al * b, Lambda * b ** 2

    n11 = g1 * al / g2 + k * (g1 * al - 2.0 * lam) / (2.0 * g2 * a)
    n12 = al + al * (g1 * al - 2.0 * lam) / (2.0 * a)
    n21 = g1 * b / g2 + k * g1 * b / (2.0 * g2 * a)
    n22 = b + g1 * al * b / (2.0 * a)
    u1 = l1 * k + l2 * g2 * al
    u2 = l2 * k + l3 * g2 * al
    den = g2 ** 2 * a

    m11 = -u1 ** 2 / den + 2.0 * l1 * n11 + 2.0 * l2 * n12 - (g1 ** 2 * al ** 2 - 4.0 * lam * g2 * rho) / (4.0 * a)
    m12 = (-u1 * u2 / den + l2 * n11 + l3 * n12 + l1 * n21 + l2 * n22
           - g1 * b * (g1 * al - 2.0 * lam) / (4.0 * a))
    m22 = -u2 ** 2 / den + 2.0 * l2 * n21 + 2.0 * l3 * n22 - g1 ** 2 * b ** 2 / (4.0 * a)

    return np.array([[m11, m12], [m12, m22]])


def symmetricEigenvalues2x2(m):
    """Closed-form eigenvalues (ascending) of a symmetric 2x2 matrix."""
    mid = 0.5 * (m[0, 0] + m[1, 1])
    rad = float(np.hypot(0.5 * (m[0, 0] - m[1, 1]), m[0, 1]))

    return (float(mid - rad), float(mid + rad))


def _terminalPositive(p, form, lt):
    term = form.Gterm + lt
    if p.meanReversion == 0.0:
        # Child flow inert: only the inventory block is active.
        return bool(term[0, 0] > 0.0)

    return bool(term[0, 0] > 0.0 and np.linalg.det(term) > 0.0)


def certifyPsd(p, Lambda, caseTag='Manual'):
    """Assembles Mtilde for the passed shift constant and certifies it.

    **Parameters:**

    * p - validated ModelParams
    * Lambda - shift constant, >= 0
    * caseTag - tag recorded in the certificate

    **Returns:**

    A WellposednessCertificate; 'passed' is false on failure."""
    if Lambda < 0.0:
        raise ValueError("'Lambda' must be nonnegative.")

    form = buildMatrixRiccati(p)
    lt = lambdaTilde(p, Lambda)
    mt = mtildeEntries(p, Lambda)
    eig = symmetricEigenvalues2x2(mt)
    f, g = evalFg(p, Lambda)
    det = float(mt[0, 0] * mt[1, 1] - mt[0, 1] ** 2)
    passed = eig[0] >= -TOL_PSD and _terminalPositive(p, form, lt)

    return WellposednessCertificate(caseTag, float(Lambda), lt, mt, eig, f, g, det, bool(passed))


def _analyticCandidates(p):
    """Shift constants suggested by the case analysis, with the case tag."""
    q, lin, c = _fCoefficients(p)
    s = p.caseQuantity

    if p.lam == 0.0:
        tag = 'RiskNeutralRemark'
        if q < 0.0:
            # Maximizer of f, then of the exact rank-one factor of Mtilde,
            # whose quadratic term is twice as steep.
            return [max(-lin / (2.0 * q), 0.0), max(-lin / (4.0 * q), 0.0)], tag
        if lin > 0.0:
            # f is linear and increasing: go past its root.
            return [max(-2.0 * c / lin, 0.0)], tag
        return [0.0], tag

    if s <= 0.0:
        if p.alpha * s == 0.0:
            # h1 = f - lambda gamma1^2 / (4 gamma2 rho a) is linear with positive slope.
            offset = p.lam * p.gamma1 ** 2 / (4.0 * p.gamma2 * p.rho * p.a) if p.rho > 0.0 else 0.0
            root = (offset - c) / lin if lin > 0.0 else 0.0
            return [2.0 * max(root, 0.0)], 'Case1.1'
        return [-lin / (2.0 * q)], 'Case1.2'

    # h2 = f - 2g has the same quadratic part as f.
    gSlope = p.lam * s / (p.gamma2 * p.a)
    return [max(-(lin - 2.0 * gSlope) / (2.0 * q), 0.0)], 'Case2'


def selectLambda(p):
    """Selects the shift constant and returns a passing certificate.

    Falls back to a logarithmic grid over [1e-6, 1e6] if the analytic
    choice does not certify.

    **Raises:**

    * NoPsdLambdaFound - if no candidate certifies; carries the best
      (least negative) minimum eigenvalue seen"""
    candidates, tag = _analyticCandidates(p)
    best = None

    for Lambda in candidates:
        cert = certifyPsd(p, Lambda, tag)
        if tag == 'Case1.1':
            # h1 eventually dominates: double until certified.
            while not cert.passed and Lambda < GRID_LAMBDAS[-1]:
                Lambda = max(2.0 * Lambda, GRID_LAMBDAS[0])
                cert = certifyPsd(p, Lambda, tag)
        if cert.passed:
            log.info("Certified with %s, Lambda=%.6g, min eigenvalue %.3g", tag, cert.Lambda,
                     cert.minEigenvalue)
            return cert
        if best is None or cert.minEigenvalue > best.minEigenvalue:
            best = cert

    log.warning("%s choice did not certify (min eigenvalue %.3g); trying grid.", tag, best.minEigenvalue)
    for candidate in GRID_LAMBDAS:
        trial = certifyPsd(p, float(candidate), 'GridFallback')
        if trial.passed:
            log.info("Grid fallback certified with Lambda=%.6g", trial.Lambda)
            return trial
        if trial.minEigenvalue > best.minEigenvalue:
            best = trial

    raise NoPsdLambdaFound(best.minEigenvalue, best.Lambda)


class NoPsdLambdaFound(Exception):
    """Error raised when no shift constant certifies the parameters."""

    def __init__(self, bestMinEigenvalue, bestLambda):
        super().__init__("No shift constant certifies these parameters; best minimum eigenvalue "
                         "%.6g at Lambda=%.6g." % (bestMinEigenvalue, bestLambda))
        self.bestMinEigenvalue = bestMinEigenvalue
        self.bestLambda = bestLambda
