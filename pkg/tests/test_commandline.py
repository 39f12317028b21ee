import csv
import json
import os
import shutil
import tempfile
import unittest
from unittest import mock
# unittest docs: https://docs.python.org/3/library/unittest.html

import numpy as np

from liqtools.commandline import *
from liqtools.commandline.writers import DirectoryWriter, formatCell
from liqtools.model import ModelParams, SigmaSchedule

FIG1_LEFT = """gamma1 = 0.1
gamma2 = 0.5
rho = 0.7
alpha = 0.5
beta = 1.1
lambda = 1.5
T = 1
sigma = 0.8
"""

OBIZHAEVA_WANG = """gamma1 = 0.1
gamma2 = 0.5
rho = 0.7
alpha = 0
beta = 0
lambda = 0
T = 1
sigma = 0
"""


class CommandTestCase(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.dir, True)

    def config(self, text, name='run.cfg'):
        path = os.path.join(self.dir, name)
        with open(path, 'w') as f:
            f.write(text)
        return path

    def out(self, name):
        return os.path.join(self.dir, name)

    def table(self, *parts):
        return np.loadtxt(os.path.join(self.dir, *parts), delimiter=',', skiprows=1, ndmin=2)

    def records(self, *parts):
        with open(os.path.join(self.dir, *parts), newline='') as f:
            return list(csv.reader(f))


class TestSolve(CommandTestCase):

    def test_obizhaevaWang(self):
        code = main(['solve', '--config', self.config(OBIZHAEVA_WANG), '--steps', '200',
                     '--out', self.out('ow')])
        self.assertEqual(code, EXIT_OK)

        coeffs = self.table('ow', 'coefficients.csv')
        self.assertEqual(coeffs.shape, (201, 10))
        self.assertAlmostEqual(coeffs[0, 4], 0.5 / 2.7, places=9, msg="B11(0) = gamma2 / (2 + rho T).")

        with open(os.path.join(self.dir, 'ow', 'manifest.json')) as f:
            manifest = json.load(f)
        self.assertEqual(manifest['command'], 'solve')
        self.assertEqual(manifest['gridSteps'], 200)
        self.assertEqual(manifest['outputs'], ['certificate.csv', 'coefficients.csv', 'manifest.json'])
        self.assertTrue(manifest['certificate']['passed'])

    def test_certificateRecord(self):
        self.assertEqual(main(['solve', '--config', self.config(FIG1_LEFT), '--steps', '100',
                               '--out', self.out('fig1')]), EXIT_OK)
        rows = self.records('fig1', 'certificate.csv')
        self.assertEqual(rows[0], list(CERTIFICATE_HEADER))
        self.assertEqual(rows[1][0], 'Case1.1')
        self.assertEqual(rows[1][-1], 'true')

    def test_configErrors(self):
        missing = self.config(FIG1_LEFT.replace("rho = 0.7\n", ""), 'missing.cfg')
        self.assertEqual(main(['solve', '--config', missing, '--out', self.out('a')]), EXIT_CONFIG)
        invalid = self.config(FIG1_LEFT.replace("alpha = 0.5", "alpha = 1.2"), 'invalid.cfg')
        self.assertEqual(main(['solve', '--config', invalid, '--out', self.out('b')]), EXIT_CONFIG)
        self.assertEqual(main(['solve', '--config', self.out('nothing.cfg'), '--out', self.out('c')]),
                         EXIT_CONFIG)
        self.assertEqual(main(['solve', '--config', self.config(FIG1_LEFT), '--steps', '1',
                               '--out', self.out('d')]), EXIT_CONFIG)

    def test_blowUpKeepsManifest(self):
        failure = NonFiniteCoefficient('B', 0.25)
        with mock.patch('liqtools.commandline.solveCoefficients', side_effect=failure):
            code = main(['solve', '--config', self.config(FIG1_LEFT), '--steps', '100',
                         '--out', self.out('blow')])
        self.assertEqual(code, EXIT_BLOWUP)
        self.assertEqual(self.records('blow', 'certificate.csv')[1][0], 'Case1.1')
        self.assertFalse(os.path.exists(os.path.join(self.dir, 'blow', 'coefficients.csv')))
        with open(os.path.join(self.dir, 'blow', 'manifest.json')) as f:
            manifest = json.load(f)
        self.assertEqual(manifest['notes']['solve'],
                         {'finite': False, 'system': 'B', 'time': 0.25, 'certificatePassed': True})
        self.assertTrue(manifest['certificate']['passed'], "The certificate outcome is still reported.")
        self.assertEqual(manifest['outputs'], ['certificate.csv', 'manifest.json'])

    def test_failureWritesManifest(self):
        failure = NonFinite("Simulated paths are not finite.")
        with mock.patch('liqtools.commandline.simulateOptimal', side_effect=failure):
            code = main(['simulate', '--config', self.config(FIG1_LEFT), '--steps', '50', '--paths', '4',
                         '--out', self.out('fail')])
        self.assertEqual(code, EXIT_BLOWUP)
        with open(os.path.join(self.dir, 'fail', 'manifest.json')) as f:
            manifest = json.load(f)
        self.assertEqual(manifest['command'], 'simulate')
        self.assertEqual(manifest['notes']['error']['type'], 'NonFinite')


class TestSimulate(CommandTestCase):

    def simulate(self, out, workers):
        return main(['simulate', '--config', self.config(FIG1_LEFT), '--steps', '100', '--paths', '20',
                     '--seed', '5', '--workers', str(workers), '--per-path', '--out', self.out(out)])

    def test_outputs(self):
        self.assertEqual(self.simulate('one', 1), EXIT_OK)
        summary = self.table('one', 'summary.csv')
        self.assertEqual(summary.shape, (103, 8))
        self.assertEqual(summary[-1, 1], 0.0, "Position is closed at T.")
        paths = self.table('one', 'paths_X.csv')
        self.assertEqual(paths.shape, (101, 21))

    def test_reproducible(self):
        self.assertEqual(self.simulate('one', 1), EXIT_OK)
        self.assertEqual(self.simulate('two', 3), EXIT_OK)
        for name in ('summary.csv', 'paths_X.csv'):
            with open(os.path.join(self.dir, 'one', name), 'rb') as a, \
                    open(os.path.join(self.dir, 'two', name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), "%s differs between worker counts." % name)

    def test_badWorkers(self):
        code = main(['simulate', '--config', self.config(FIG1_LEFT), '--workers', '0', '--steps', '10',
                     '--paths', '2', '--out', self.out('w')])
        self.assertEqual(code, EXIT_CONFIG)


class TestOracleCommand(CommandTestCase):

    def test_outputs(self):
        code = main(['oracle', '--config', self.config(FIG1_LEFT), '--steps', '400', '--n-list', '40,20',
                     '--out', self.out('o')])
        self.assertEqual(code, EXIT_OK)
        errors = self.table('o', 'oracle_errors.csv')
        self.assertEqual(errors[:, 0].tolist(), [20.0, 40.0])
        self.assertEqual(self.table('o', 'oracle_N20.csv').shape, (21, 11))
        self.assertTrue(os.path.exists(os.path.join(self.dir, 'o', 'oracle_diagnostics.csv')))


class TestAlphaThreshold(CommandTestCase):

    def test_riskNeutralNeedsNoThreshold(self):
        cfg = self.config(FIG1_LEFT.replace("lambda = 1.5", "lambda = 0"))
        self.assertEqual(main(['alpha-threshold', '--config', cfg, '--out', self.out('t')]), EXIT_OK)
        rows = self.records('t', 'alpha_threshold.csv')
        self.assertEqual(rows[1], ['certificate', 'none', 'false'])

    def test_badBounds(self):
        cfg = self.config(FIG1_LEFT)
        self.assertEqual(main(['alpha-threshold', '--config', cfg, '--lo', '2', '--hi', '3',
                               '--out', self.out('t')]), EXIT_CONFIG)


class TestBisection(unittest.TestCase):

    def setUp(self):
        self.p = ModelParams(gamma1=0.1, gamma2=0.5, rho=0.7, alpha=0.0, beta=1.1, lam=1.5, T=1.0,
                             sigma=SigmaSchedule.constant(0.8))

    def test_bracketed(self):
        threshold, bracketed = bisectAlpha(self.p, lambda q: q.alpha < 0.3, 0.0, 1.0, 1e-4)
        self.assertTrue(bracketed)
        self.assertAlmostEqual(threshold, 0.3, delta=1e-4)

    def test_notBracketed(self):
        self.assertEqual(bisectAlpha(self.p, lambda q: True, 0.0, 1.0, 1e-4), (1.0, False))

    def test_failsAtLowerBound(self):
        self.assertRaises(BoundsDoNotBracket, bisectAlpha, self.p, lambda q: False, 0.0, 1.0, 1e-4)

    def test_predicates(self):
        p = self.p.replace(alpha=0.5)
        self.assertTrue(certificatePasses(p))
        from liqtools.riccati import TimeGrid
        self.assertTrue(solverFinite(p, TimeGrid(0.0, 1.0, 50)))


class TestWriters(CommandTestCase):

    def test_formatCell(self):
        self.assertEqual(formatCell(0.5), '0.5')
        self.assertEqual(formatCell(0.1), '0.10000000000000001')
        self.assertEqual(formatCell(np.float64(2.0)), '2')
        self.assertEqual(formatCell(True), 'true')
        self.assertEqual(formatCell(np.int64(7)), '7')
        self.assertEqual(formatCell('Case2'), 'Case2')

    def test_directoryWriter(self):
        writer = DirectoryWriter(self.out('w'))
        writer.writeTable('t.csv', ('a', 'b'), [[1.0, 0.25], [2.0, 0.5]])
        writer.writeRecords('r.csv', ('name', 'value'), [('x', 1.5)])
        writer.writeJson('m.json', {'value': np.float64(0.5), 'array': np.arange(2)})
        self.assertEqual(writer.written, ['t.csv', 'r.csv', 'm.json'])
        with open(os.path.join(self.dir, 'w', 't.csv')) as f:
            self.assertEqual(f.read(), 'a,b\n1,0.25\n2,0.5\n')
        with open(os.path.join(self.dir, 'w', 'm.json')) as f:
            self.assertEqual(json.load(f), {'value': 0.5, 'array': [0, 1]})
        self.assertRaises(ValueError, writer.writeTable, 't.csv', ('a',), [[1.0]])


class TestFigures(unittest.TestCase):

    def test_parameterSets(self):
        from liqtools.commandline.figures import figureParams
        left, right = figureParams(2)
        self.assertEqual((left[0], right[0]), ('left', 'right'))
        self.assertEqual((left[1].alpha, right[1].alpha), (0.0, 1.8))
        self.assertEqual(left[1].sigma(0.5), 0.8)
        self.assertRaises(ValueError, figureParams, 4)

    def test_panelTable(self):
        from liqtools.commandline.figures import runFigure
        panels = runFigure(1, seed=3, steps=100)
        self.assertEqual(len(panels), 2)
        for run in panels:
            table = run.table()
            self.assertEqual(table.shape, (103, 4))
            self.assertEqual(table[0, 1], 1.0, "The first row is the position before the initial block.")
            self.assertEqual(table[-1, 1], 0.0)
            self.assertEqual(table[-1, 3], 0.0)
        self.assertLess(panels[0].table()[1, 1], panels[1].table()[1, 1],
                        "Risk aversion sells more in the initial block.")


if __name__ == '__main__':
    unittest.main()
