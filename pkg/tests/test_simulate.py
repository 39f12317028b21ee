import dataclasses
import unittest
# unittest docs: https://docs.python.org/3/library/unittest.html

import numpy as np
import numpy.testing as npt

from liqtools.model import InitialLaw, ModelParams, SigmaSchedule, validateParams
from liqtools.riccati import TimeGrid, solveCoefficients
from liqtools.simulate import *
from liqtools.simulate.streams import SEED_LIMIT, SeedCollision, drawStandardNormals, pathGenerator


def fig1Left(**changes):
    values = dict(gamma1=0.1, gamma2=0.5, rho=0.7, alpha=0.5, beta=1.1, lam=1.5, T=1.0,
                  sigma=SigmaSchedule.constant(0.8))
    values.update(changes)
    return validateParams(ModelParams(**values))


class TestStreams(unittest.TestCase):

    def test_pathsIndependentOfEnsembleSize(self):
        init5, inc5 = drawStandardNormals(9, range(5), 20)
        init8, inc8 = drawStandardNormals(9, range(8), 20)
        npt.assert_array_equal(inc5, inc8[:5])
        npt.assert_array_equal(init5, init8[:5])

    def test_workersDoNotChangeDraws(self):
        one = drawStandardNormals(123, range(13), 50, workers=1)
        four = drawStandardNormals(123, range(13), 50, workers=4)
        npt.assert_array_equal(one[1], four[1])

    def test_streamsDiffer(self):
        a = pathGenerator(1, 0).standard_normal(4)
        b = pathGenerator(1, 1).standard_normal(4)
        c = pathGenerator(2, 0).standard_normal(4)
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_collisions(self):
        self.assertRaises(SeedCollision, drawStandardNormals, 1, [0, 3, 3], 5)
        self.assertRaises(SeedCollision, drawStandardNormals, 1, [-1], 5)
        self.assertRaises(SeedCollision, drawStandardNormals, SEED_LIMIT, [0], 5)
        self.assertRaises(SeedCollision, drawStandardNormals, -1, [0], 5)


class TestObizhaevaWangPath(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.p = owReferenceParams(fig1Left())
        cls.g = TimeGrid.forParams(cls.p, 2000)
        cls.coeffs = solveCoefficients(cls.p, cls.g)
        cls.law = InitialLaw.fromParams(cls.p)
        cls.mean = solveMeanPath(cls.p, cls.coeffs, cls.law)

    def test_referenceParams(self):
        self.assertEqual((self.p.alpha, self.p.beta, self.p.lam), (0.0, 0.0, 0.0))
        self.assertTrue(self.p.sigma.isZero())
        self.assertEqual((self.p.gamma2, self.p.rho), (0.5, 0.7))

    def test_blocksAndRate(self):
        block = 1.0 / (2.0 + 0.7)
        self.assertAlmostEqual(self.mean.jump0, block, places=9, msg="Initial block is 1/(2 + rho T).")
        npt.assert_allclose(self.mean.rate[:-1], 0.7 * block, atol=2e-3)
        self.assertAlmostEqual(self.mean.jumpT, block, delta=2e-3)
        self.assertEqual(self.mean.terminalInventory(), 0.0)

    def test_noiselessPathsEqualMean(self):
        ens = simulateOptimal(self.p, self.coeffs, self.mean, self.law, 3, 42)
        for i in range(3):
            npt.assert_array_equal(ens.X[i], self.mean.X)
            npt.assert_array_equal(ens.Y[i], self.mean.E[:, 1])


class TestOptimalEnsemble(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.p = fig1Left(x0Var=0.25)
        cls.g = TimeGrid.forParams(cls.p, 500)
        cls.coeffs = solveCoefficients(cls.p, cls.g)
        cls.law = InitialLaw.fromParams(cls.p)
        cls.mean = solveMeanPath(cls.p, cls.coeffs, cls.law)
        cls.ens = simulateOptimal(cls.p, cls.coeffs, cls.mean, cls.law, 64, 7)

    def test_fullLiquidation(self):
        npt.assert_array_equal(self.ens.terminalX, 0.0)
        npt.assert_array_equal(self.ens.jumpT, self.ens.X[:, -1])

    def test_childFlowShared(self):
        self.assertEqual(self.ens.C.shape, (self.g.nSteps + 1,))
        npt.assert_array_equal(self.ens.C, self.mean.E[:, 2])

    def test_workersGiveIdenticalPaths(self):
        other = simulateOptimal(self.p, self.coeffs, self.mean, self.law, 64, 7, workers=3)
        npt.assert_array_equal(self.ens.X, other.X)
        npt.assert_array_equal(self.ens.Y, other.Y)
        npt.assert_array_equal(self.ens.Z, other.Z)

    def test_seedChangesPaths(self):
        other = simulateOptimal(self.p, self.coeffs, self.mean, self.law, 64, 8)
        self.assertFalse(np.array_equal(self.ens.X, other.X))

    def test_specMatchesOptimal(self):
        spec = optimalSpec(self.p, self.coeffs)
        ens = simulateAffine(self.p, spec, self.law, 64, 7)
        npt.assert_array_equal(ens.X, self.ens.X)
        npt.assert_array_equal(ens.Z, self.ens.Z)
        self.assertEqual(spec.label, 'optimal')

    def test_firstOrderConditionsAfterJump(self):
        foc = focResiduals(self.ens, self.coeffs)
        self.assertLess(abs(foc.rMean[0]), 1e-12)
        self.assertLess(float(np.max(np.abs(foc.rDev[:, 0]))), 1e-12)
        self.assertEqual(foc.rMean.shape, (self.g.nSteps,))

    def test_initialJumpSplitsMeanAndDeviation(self):
        spec = optimalSpec(self.p, self.coeffs)
        expected = self.mean.jump0 + (self.ens.stateMinus - self.law.mean) @ spec.jumpDevGain
        npt.assert_allclose(self.ens.jump0, expected, atol=1e-14)
        npt.assert_allclose(self.ens.X[:, 0], self.ens.stateMinus[:, 0] - self.ens.jump0, atol=1e-14)

    def test_summary(self):
        table = ensembleSummary(self.ens)
        self.assertEqual(table.shape, (self.g.nSteps + 3, len(SUMMARY_HEADER)))
        self.assertEqual(table[-1, 1], 0.0, "Mean inventory after the terminal block is 0.")
        self.assertEqual(table[-1, 2], 0.0)
        npt.assert_allclose(table[0, 1], np.mean(self.ens.stateMinus[:, 0]))
        npt.assert_allclose(table[-1, 7], np.mean(self.ens.Z[:, -1] + self.ens.jumpT))

    def test_deviation(self):
        dev = self.ens.deviation()
        self.assertEqual(dev.shape, (64, self.g.nSteps + 1, 3))
        npt.assert_array_equal(dev[..., 2], 0.0)


class TestMeanResidualOrder(unittest.TestCase):

    def test_meanResidualShrinksWithStep(self):
        p = fig1Left()
        law = InitialLaw.fromParams(p)
        coeffs = solveCoefficients(p, TimeGrid.forParams(p, 1000))

        def supMean(steps):
            g = TimeGrid.forParams(p, steps)
            mean = solveMeanPath(p, coeffs, law, g)
            ens = simulateOptimal(p, coeffs, mean, law, 1, 0)
            return focResiduals(ens, coeffs).supMean

        coarse, fine = supMean(250), supMean(1000)
        self.assertGreater(coarse / fine, 2.5, "Mean residual %g -> %g is not first order." % (coarse, fine))


class TestAffineStrategies(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.p = fig1Left()
        cls.g = TimeGrid.forParams(cls.p, 200)
        cls.law = InitialLaw.fromParams(cls.p)

    def test_terminalBlock(self):
        ens = simulateAffine(self.p, terminalBlockSpec(self.g), self.law, 5, 1)
        npt.assert_array_equal(ens.X, 1.0)
        npt.assert_array_equal(ens.jump0, 0.0)
        npt.assert_array_equal(ens.jumpT, 1.0)
        npt.assert_array_equal(ens.terminalX, 0.0)

    def test_immediateBlock(self):
        ens = simulateAffine(self.p, immediateBlockSpec(self.g), self.law, 5, 1)
        npt.assert_array_equal(ens.jump0, 1.0)
        npt.assert_array_equal(ens.X, 0.0)
        npt.assert_array_equal(ens.jumpT, 0.0)
        npt.assert_allclose(ens.Y[:, 0], 0.5, err_msg="The block moves the impact by gamma2.")

    def test_liquidationViolation(self):
        spec = dataclasses.replace(terminalBlockSpec(self.g), terminalBlock=False)
        with self.assertRaises(LiquidationViolation):
            simulateAffine(self.p, spec, self.law, 2, 1)

    def test_scaled(self):
        coeffs = solveCoefficients(self.p, self.g)
        spec = optimalSpec(self.p, coeffs)
        faster = spec.scaled(drift=1.2, label='fast')
        npt.assert_allclose(faster.driftConst, 1.2 * spec.driftConst)
        npt.assert_array_equal(faster.jumpDevGain, spec.jumpDevGain)
        self.assertEqual(faster.label, 'fast')
        quiet = spec.scaled(diffusion=0.0)
        npt.assert_array_equal(quiet.diffusionLoading, 0.0)
        self.assertEqual(quiet.label, 'optimal*drift1*diffusion0')

    def test_badGains(self):
        spec = terminalBlockSpec(self.g)
        self.assertRaises(ValueError, dataclasses.replace, spec, driftConst=np.zeros(3))
        self.assertRaises(NonFinite, dataclasses.replace, spec, jumpConst=float('nan'))

    def test_gridMismatch(self):
        from liqtools.riccati import InvalidGrid
        self.assertRaises(InvalidGrid, simulateAffine, self.p, terminalBlockSpec(self.g), self.law, 2, 1,
                          TimeGrid(0.0, 1.0, 10))

    def test_randomChildFlowRejected(self):
        law = InitialLaw(np.array([1.0, 0.0, 0.0]), np.diag([0.0, 0.0, 0.1]))
        self.assertRaises(ValueError, simulateAffine, self.p, terminalBlockSpec(self.g), law, 2, 1)


if __name__ == '__main__':
    unittest.main()
