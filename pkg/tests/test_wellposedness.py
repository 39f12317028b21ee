import unittest
# unittest docs: https://docs.python.org/3/library/unittest.html

import numpy as np
import numpy.testing as npt

from liqtools.model import ModelParams, SigmaSchedule, validateParams
from liqtools.riccati import bRhs
from liqtools.wellposedness import *


def params(**values):
    base = dict(gamma1=0.1, gamma2=0.5, rho=0.7, alpha=0.5, beta=1.1, lam=0.0, T=1.0,
                sigma=SigmaSchedule.constant(0.8))
    base.update(values)
    return validateParams(ModelParams(**base))


# The parameter sets of the three numerical studies.
STUDY_SETS = {
    'fig1left': params(lam=1.5),
    'fig1right': params(),
    'fig2left': params(rho=0.4, alpha=0.0, beta=3.0),
    'fig2right': params(rho=0.4, alpha=1.8, beta=3.0),
    'fig3left': params(gamma2=2.0),
    'fig3right': params(gamma2=0.3),
}

# Risk-averse sets, one per sign of gamma1 alpha - gamma2 rho + gamma2 (beta - alpha).
RISK_AVERSE_SETS = {
    'fig1left': STUDY_SETS['fig1left'],
    'case12': params(lam=1.5, beta=0.8),
    'case2': params(lam=1.5, beta=2.0),
}


class TestMatrixForm(unittest.TestCase):

    def test_matchesReducedSystem(self):
        """The 2x2 matrix form is the (11, 13, 33) block of the B system."""
        rng = np.random.default_rng(3)
        for name, p in STUDY_SETS.items():
            form = buildMatrixRiccati(p)
            for B11, B13, B33 in rng.uniform(-1.0, 1.0, (5, 3)):
                P = np.array([[B11, B13], [B13, B33]])
                dP = riccatiMatrixRhs(form, P)
                expected = bRhs(p, [B11, B13, B33])
                npt.assert_allclose([dP[0, 0], dP[0, 1], dP[1, 1]], expected, rtol=1e-10, atol=1e-12,
                                    err_msg="Matrix form disagrees with bRhs for %s." % name)
                self.assertAlmostEqual(dP[0, 1], dP[1, 0], places=14)

    def test_terminalValue(self):
        form = buildMatrixRiccati(STUDY_SETS['fig1left'])
        npt.assert_array_equal(form.Gterm, [[0.25, 0.0], [0.0, 0.0]])

    def test_shiftedDriverFormula(self):
        """Mtilde equals the driver of the shifted equation evaluated at
        the constant shift."""
        for name, p in STUDY_SETS.items():
            for Lambda in (0.0, 0.01, 0.7):
                form = buildMatrixRiccati(p)
                lt = lambdaTilde(p, Lambda)
                expected = -riccatiMatrixRhs(form, -lt)
                npt.assert_allclose(mtildeEntries(p, Lambda), expected, rtol=1e-10, atol=1e-12,
                                    err_msg="%s at Lambda=%g" % (name, Lambda))


class TestEigenvalues(unittest.TestCase):

    def test_againstNumpy(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = rng.normal(size=(2, 2))
            m = m + m.T
            npt.assert_allclose(symmetricEigenvalues2x2(m), np.linalg.eigvalsh(m), atol=1e-12)

    def test_ascending(self):
        lo, hi = symmetricEigenvalues2x2(np.array([[2.0, 0.0], [0.0, -1.0]]))
        self.assertEqual((lo, hi), (-1.0, 2.0))


class TestCertificates(unittest.TestCase):

    def test_studySetsCertify(self):
        for name, p in STUDY_SETS.items():
            cert = selectLambda(p)
            self.assertTrue(cert.passed, "%s should certify." % name)
            self.assertGreaterEqual(cert.minEigenvalue, -TOL_PSD)
            self.assertIn(cert.caseTag, CASE_TAGS)

    def test_caseTags(self):
        self.assertEqual(selectLambda(STUDY_SETS['fig1left']).caseTag, 'Case1.1')
        for name in ('fig1right', 'fig2left', 'fig2right', 'fig3left', 'fig3right'):
            self.assertEqual(selectLambda(STUDY_SETS[name]).caseTag, 'RiskNeutralRemark', name)

    def test_noExcitationRiskNeutral(self):
        """alpha = 0, lambda = 0: only the child flow entry of Mtilde is
        left, so the determinant vanishes."""
        p = STUDY_SETS['fig2left']
        cert = selectLambda(p)
        self.assertAlmostEqual(cert.detMtilde, 0.0, places=12)
        Lambda = cert.Lambda
        expected = 3.0 ** 2 * (2.0 * 3.0 * Lambda - 0.1 ** 2 / (4.0 * 0.5 * 0.4))
        self.assertAlmostEqual(cert.Mtilde[1, 1], expected, places=10)
        self.assertGreater(cert.Mtilde[1, 1], 0.0)

    def test_riskNeutralRankOne(self):
        """For lambda = 0, Mtilde is a multiple of v v^T with v = (alpha/b, 1)."""
        p = STUDY_SETS['fig2right']
        for Lambda in (0.01, 0.03, 0.05):
            m = mtildeEntries(p, Lambda)
            self.assertAlmostEqual(m[0, 0] * m[1, 1] - m[0, 1] ** 2, 0.0, places=10)
            self.assertAlmostEqual(m[0, 1], 1.5 * m[1, 1], places=10)

    def test_manualCertificate(self):
        p = STUDY_SETS['fig1left']
        cert = certifyPsd(p, 0.0)
        self.assertEqual(cert.caseTag, 'Manual')
        self.assertFalse(cert.passed, "Lambda = 0 leaves a negative entry in the driver.")
        self.assertRaises(ValueError, certifyPsd, p, -1.0)

    def test_certificateRecord(self):
        cert = selectLambda(STUDY_SETS['fig1left'])
        row = cert.csvRow()
        self.assertEqual(len(row), len(CERTIFICATE_HEADER))
        self.assertEqual(row[0], 'Case1.1')
        self.assertIs(cert.summary()['passed'], True)
        npt.assert_allclose(cert.LambdaTilde, cert.Lambda * np.array([[0.25, 0.3], [0.3, 0.36]]))

    def test_evalFg(self):
        p = STUDY_SETS['fig1left']
        f0, g0 = evalFg(p, 0.0)
        self.assertAlmostEqual(f0, -0.1 ** 2 / (4.0 * p.a))
        self.assertEqual(g0, 0.0)
        f, g = evalFg(STUDY_SETS['fig1right'], 1.0)
        self.assertEqual(g, 0.0, "g vanishes without risk aversion.")
        f, g = evalFg(STUDY_SETS['fig2left'], 1.0)
        self.assertAlmostEqual(f, 2.0 * 3.0 - 0.1 ** 2 / (2.0 * 0.2), places=12)


class TestShapeFunctions(unittest.TestCase):

    def test_fIsScaledDriverEntry(self):
        """With risk aversion, f (beta - alpha)^2 is the lower right entry
        of Mtilde for every shift constant."""
        for name, p in RISK_AVERSE_SETS.items():
            b2 = p.meanReversion ** 2
            for Lambda in (0.0, 0.01, 0.5, 1.0, 10.0, 250.0):
                f, g = evalFg(p, Lambda)
                m22 = mtildeEntries(p, Lambda)[1, 1]
                self.assertAlmostEqual(f * b2, m22, delta=1e-12 * max(1.0, abs(m22)),
                                       msg="%s at Lambda=%g" % (name, Lambda))

    def test_riskAverseCaseTags(self):
        self.assertLess(RISK_AVERSE_SETS['case12'].caseQuantity, 0.0)
        self.assertGreater(RISK_AVERSE_SETS['case2'].caseQuantity, 0.0)
        self.assertEqual(RISK_AVERSE_SETS['fig1left'].caseQuantity, 0.0)
        self.assertEqual(selectLambda(RISK_AVERSE_SETS['fig1left']).caseTag, 'Case1.1')

    def test_gIsLinear(self):
        p = RISK_AVERSE_SETS['case2']
        slope = p.lam * p.caseQuantity / (p.gamma2 * p.a)
        for Lambda in (0.0, 0.3, 4.0):
            self.assertAlmostEqual(evalFg(p, Lambda)[1], slope * Lambda, places=12)

    def test_riskNeutralFIsNotDriverEntry(self):
        """Without risk aversion f keeps the risk-neutral constant
        -gamma1^2 / (2 d); the exact entry has -gamma1^2 / (4 d)."""
        p = STUDY_SETS['fig2left']
        for Lambda in (0.0, 0.01, 1.0):
            f, g = evalFg(p, Lambda)
            m22 = mtildeEntries(p, Lambda)[1, 1]
            self.assertAlmostEqual(m22 / 9.0, f + 0.1 ** 2 / (4.0 * 0.2), places=12)
            cert = certifyPsd(p, Lambda)
            self.assertEqual(cert.fVal, f)
            self.assertEqual(cert.Mtilde[1, 1], m22)


if __name__ == '__main__':
    unittest.main()
