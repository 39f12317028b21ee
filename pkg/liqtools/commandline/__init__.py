"""liqtools

Solve, simulate and verify the mean-field optimal liquidation model.

Usage:
  liqtools solve --config PATH [options]
  liqtools simulate --config PATH [options]
  liqtools figures <which> [options]
  liqtools verify --config PATH [options]
  liqtools oracle --config PATH [options]
  liqtools alpha-threshold --config PATH [options]
  liqtools (-h | --help)
  liqtools --version

Options:
  --config PATH   Key = value config file.
  --seed U64      Run seed, overrides the config.
  --steps N       Grid steps, overrides the config.
  --paths N       Monte-Carlo paths, overrides the config.
  --out DIR       Output directory [default: out].
  --per-path      Also write every simulated inventory path.
  --workers N     Threads drawing the random streams [default: 1].
  --n-list LIST   Oracle step counts [default: 50,100,200,400].
  --lo LO         Lower alpha bound for the threshold search [default: 0].
  --hi HI         Upper alpha bound (default: just inside the admissible range).
  --tol TOL       Bisection tolerance on alpha [default: 1e-3].
  -v --verbose    Log at debug level.

Exit codes: 0 success, 2 config or validation error, 3 well-posedness
certificate failed, 4 verification failed, 5 numerical blow-up.
"""

import logging
import sys
import time
from dataclasses import dataclass, field

import numpy as np
from docopt import docopt

from liqtools import __version__
from liqtools.cost import REPORT_HEADER, evaluateCost, valueFunction, verifySquareDecomposition
from liqtools.model import InitialLaw, ModelError
from liqtools.model.configsheet import ConfigError, loadConfig
from liqtools.oracle import (DIAGNOSTIC_HEADER, ERROR_HEADER, TABLE_HEADER, SingularDenominator,
                             convergenceReport, runDp)
from liqtools.riccati import (CSV_HEADER, InvalidGrid, NonFiniteCoefficient, TimeGrid,
                              crosscheckFullMatrix, solveB, solveCoefficients)
from liqtools.simulate import (SUMMARY_HEADER, LiquidationViolation, NonFinite, ensembleSummary,
                               focResiduals, optimalSpec, simulateOptimal, solveMeanPath)
from liqtools.simulate.streams import SeedCollision
from liqtools.wellposedness import CERTIFICATE_HEADER, NoPsdLambdaFound, certifyPsd, selectLambda
from liqtools.commandline.writers import DirectoryWriter

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WELLPOSEDNESS = 3
EXIT_VERIFICATION = 4
EXIT_BLOWUP = 5

# Verification battery settings.
VERIFY_STEPS = 1000
FOC_STEPS = (250, 500, 1000)
FOC_DEVIATION_PATHS = 200
DISCRETIZATION_ALLOWANCE = 5e-3
CROSSCHECK_TOL = 1e-6
COLLAPSE_TOL = 1e-10
RELATION_TOL = 1e-12
ORACLE_N = (50, 100, 200, 400)


##
## Results and manifest.
##

@dataclass
class RunManifest:
    """Everything needed to reproduce a run."""
    command: str
    params: dict = None
    gridSteps: int = None
    nPaths: int = None
    seed: int = None
    version: str = __version__
    certificate: dict = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @staticmethod
    def forConfig(command, cfg):
        return RunManifest(command, cfg.params.toDict(), cfg.gridSteps, cfg.nPaths, cfg.seed)

    def toDict(self):
        return {
            'command': self.command, 'params': self.params, 'gridSteps': self.gridSteps,
            'nPaths': self.nPaths, 'seed': self.seed, 'version': self.version,
            'certificate': self.certificate, 'timings': self.timings,
            'outputs': self.outputs, 'notes': self.notes,
        }


class CommandResult(object):
    """Exit code of a command plus its manifest."""

    def __init__(self, resultCode, manifest=None):
        self.resultCode = resultCode
        self.manifest = manifest


class _Stopwatch(object):
    def __init__(self, manifest):
        self._manifest = manifest

    def time(self, label, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self._manifest.timings[label] = round(time.perf_counter() - start, 6)


##
## Commands.
##

def _overrides(args):
    return {'grid_steps': args['--steps'], 'n_paths': args['--paths'], 'seed': args['--seed']}


def _loadConfig(args):
    return loadConfig(args['--config'], _overrides(args))


def _workers(args):
    try:
        n = int(args['--workers'])
    except (TypeError, ValueError):
        raise ConfigError("--workers must be an integer, got %r." % args['--workers'])
    if n < 1:
        raise ConfigError("--workers must be at least 1.")
    return n


def _certify(p, manifest, watch):
    """Runs the shift selection; returns (certificate, passed). A failed
    selection is turned into the best failing certificate."""
    try:
        cert = watch.time('certificate', selectLambda, p)
    except NoPsdLambdaFound as e:
        log.warning("%s", e)
        cert = certifyPsd(p, e.bestLambda, 'GridFallback')
    manifest.certificate = cert.summary()

    return cert, cert.passed


def cmdSolve(args, writer):
    """Solves the coefficient systems and certifies well-posedness. The
    solve runs even when the certificate fails."""
    cfg = _loadConfig(args)
    p = cfg.params
    manifest = RunManifest.forConfig('solve', cfg)
    watch = _Stopwatch(manifest)

    cert, passed = _certify(p, manifest, watch)
    writer.writeRecords('certificate.csv', CERTIFICATE_HEADER, [cert.csvRow()])

    g = TimeGrid.forParams(p, cfg.gridSteps)
    try:
        coeffs = watch.time('solve', solveCoefficients, p, g)
    except NonFiniteCoefficient as e:
        log.error("%s", e)
        manifest.notes['solve'] = {'finite': False, 'system': e.system, 'time': e.time,
                                   'certificatePassed': passed}
        return CommandResult(EXIT_BLOWUP, manifest)
    writer.writeTable('coefficients.csv', CSV_HEADER, coeffs.table())
    manifest.notes['solve'] = {'finite': True}
    manifest.notes['b11Positive'] = coeffs.b11Positive()

    return CommandResult(EXIT_OK if passed else EXIT_WELLPOSEDNESS, manifest)


def cmdSimulate(args, writer):
    """Simulates the optimal strategy and writes the ensemble summary."""
    cfg = _loadConfig(args)
    p = cfg.params
    law = InitialLaw.fromParams(p)
    manifest = RunManifest.forConfig('simulate', cfg)
    watch = _Stopwatch(manifest)

    g = TimeGrid.forParams(p, cfg.gridSteps)
    coeffs = watch.time('solve', solveCoefficients, p, g)
    mean = watch.time('meanPath', solveMeanPath, p, coeffs, law)
    ensemble = watch.time('simulate', simulateOptimal, p, coeffs, mean, law, cfg.nPaths, cfg.seed,
                          workers=_workers(args))
    ledger = evaluateCost(ensemble, p)

    writer.writeTable('summary.csv', SUMMARY_HEADER, ensembleSummary(ensemble))
    if args['--per-path']:
        writer.writeTable('paths_X.csv', ['t'] + ['path%d' % i for i in range(ensemble.nPaths)],
                          np.column_stack([g.nodes, ensemble.X.T]))

    manifest.notes['jumps'] = {
        'meanInitialJump': mean.jump0,
        'meanTerminalBlock': mean.jumpT,
        'initialJumpRange': [float(np.min(ensemble.jump0)), float(np.max(ensemble.jump0))],
        'terminalBlockRange': [float(np.min(ensemble.jumpT)), float(np.max(ensemble.jumpT))],
    }
    manifest.notes['cost'] = {'mean': ledger.mean, 'standardError': ledger.standardError,
                              'value': valueFunction(coeffs, law, g.t0).value,
                              'finite': ledger.isFinite()}

    return CommandResult(EXIT_OK, manifest)


def cmdFigures(args, writer):
    """Reproduces the panels of one numerical study on a common path."""
    from liqtools.commandline.figures import (TRAJECTORY_HEADER, closeFigure, renderFigure,
                                              runFigure)

    try:
        which = int(args['<which>'])
    except ValueError:
        raise ConfigError("Figure must be 1, 2 or 3, got %r." % args['<which>'])
    if which not in (1, 2, 3):
        raise ConfigError("Figure must be 1, 2 or 3, got %r." % which)

    seed = int(args['--seed']) if args['--seed'] is not None else 42
    steps = int(args['--steps']) if args['--steps'] is not None else 10000
    manifest = RunManifest('figures', seed=seed, gridSteps=steps, nPaths=1)
    watch = _Stopwatch(manifest)

    panels = watch.time('simulate', runFigure, which, seed, steps, _workers(args))
    manifest.params = {run.panel: run.params.toDict() for run in panels}
    for run in panels:
        writer.writeTable('figure%d_%s.csv' % (which, run.panel), TRAJECTORY_HEADER, run.table())
        manifest.notes[run.panel] = {'min': float(np.min(run.X)), 'max': float(np.max(run.X)),
                                     'initialBlock': float(run.X[0] - run.X[1])}

    fig = renderFigure(which, panels)
    try:
        writer.writeFigure('figure%d.svg' % which, fig)
    finally:
        closeFigure(fig)

    return CommandResult(EXIT_OK, manifest)


def _focSup(p, coeffs, law, steps, nPaths, seed):
    g = TimeGrid.forParams(p, steps)
    mean = solveMeanPath(p, coeffs, law, g)
    ensemble = simulateOptimal(p, coeffs, mean, law, nPaths, seed)
    foc = focResiduals(ensemble, coeffs)
    return foc.supMean, foc.supDev, abs(float(foc.rMean[0]))


def _orderPassed(sups, lo, hi):
    """Halving ratios between consecutive resolutions all in [lo, hi].
    Residuals at round-off level need no order."""
    if max(sups) < 1e-10:
        return True, float('nan')
    ratios = [a / b for a, b in zip(sups, sups[1:]) if b > 0.0]
    if len(ratios) != len(sups) - 1:
        return False, float('nan')
    return all(lo <= r <= hi for r in ratios), float(np.mean(ratios))


def cmdVerify(args, writer):
    """Runs the verification battery. The worst outcome sets the exit
    code: blow-up, then certificate failure, then any other failing check."""
    cfg = _loadConfig(args)
    p = cfg.params
    law = InitialLaw.fromParams(p)
    manifest = RunManifest.forConfig('verify', cfg)
    watch = _Stopwatch(manifest)
    checks = []

    def check(name, passed, value, tolerance):
        checks.append((name, bool(passed), float(value), float(tolerance)))
        (log.info if passed else log.warning)("check %-28s %s (value %.3g, tolerance %.3g)",
                                               name, 'passed' if passed else 'FAILED', value, tolerance)

    cert, certPassed = _certify(p, manifest, watch)
    check('certificate', certPassed, cert.minEigenvalue, 0.0)

    g = TimeGrid.forParams(p, cfg.gridSteps)
    try:
        coeffs = watch.time('solve', solveCoefficients, p, g)
    except NonFiniteCoefficient as e:
        check('solver_finite', False, e.time, 0.0)
        manifest.notes['outcome'] = 'solver blew up'
        writer.writeRecords('verify_checks.csv', ('check', 'passed', 'value', 'tolerance'), checks)
        return CommandResult(EXIT_BLOWUP, manifest)
    check('solver_finite', True, 0.0, 0.0)

    cross = watch.time('crosscheck', crosscheckFullMatrix, p, coeffs)
    check('full_matrix_agreement', cross.passed(CROSSCHECK_TOL),
          max(cross.supA, cross.supB, cross.supD), CROSSCHECK_TOL)
    if p.alpha == 0.0:
        collapse = max(np.max(np.abs(coeffs.B.values - coeffs.A.values)), np.max(np.abs(coeffs.D.values)))
        check('alpha0_collapse', collapse < COLLAPSE_TOL, collapse, COLLAPSE_TOL)

    start = time.perf_counter()
    focs = [_focSup(p, coeffs, law, n, FOC_DEVIATION_PATHS, cfg.seed) for n in FOC_STEPS]
    manifest.timings['foc'] = round(time.perf_counter() - start, 6)
    check('foc_jump_identity', max(f[2] for f in focs) < 1e-12, max(f[2] for f in focs), 1e-12)
    passed, ratio = _orderPassed([f[0] for f in focs], 1.5, 2.5)
    check('foc_mean_order', passed, ratio, 2.0)
    if not p.sigma.isZero():
        passed, ratio = _orderPassed([f[1] for f in focs], 1.5, 2.5)
        check('foc_deviation_order', passed, ratio, 2.0)

    mcGrid = TimeGrid.forParams(p, VERIFY_STEPS)
    optimal = optimalSpec(p, coeffs, mcGrid)
    specs = [optimal, optimal.scaled(drift=1.2, label='drift*1.2'),
             optimal.scaled(diffusion=0.0, label='diffusion*0')]
    decompositions = [watch.time('decomposition:%s' % s.label, verifySquareDecomposition, p, coeffs, s,
                                 law, cfg.nPaths, cfg.seed, workers=_workers(args)) for s in specs]
    writer.writeRecords('cost_report.csv', REPORT_HEADER, [d.csvRow() for d in decompositions])

    tol = DISCRETIZATION_ALLOWANCE
    best = decompositions[0]
    check('optimal_square_A', best.sA <= tol, best.sA, tol)
    check('optimal_square_B', best.sB <= tol, best.sB, tol)
    check('optimal_attains_value', abs(best.jMean - best.V) <= 3.0 * best.jStandardError + tol,
          best.jMean - best.V, 3.0 * best.jStandardError + tol)
    for d in decompositions:
        bound = 3.0 * d.residualStandardError + tol
        check('decomposition:%s' % d.strategyId, abs(d.residual) <= bound, d.residual, bound)
        check('above_value:%s' % d.strategyId, d.jMean + 3.0 * d.jStandardError >= d.V - tol,
              d.jMean - d.V, -tol)

    report = watch.time('oracle', convergenceReport, p, ORACLE_N, cfg.gridSteps, law, _workers(args))
    writer.writeTable('oracle_errors.csv', ERROR_HEADER, report.errorTable())
    scale = max(1.0, float(np.max(np.abs(coeffs.B.values))))
    worst = max(r.maxRelationResidual for r in report.rows)
    check('oracle_relations', worst <= RELATION_TOL * scale, worst, RELATION_TOL * scale)
    for which in ('errA', 'errB', 'errD', 'errF'):
        if getattr(report.rows[-1], which) < 1e-10:
            continue
        order = float(np.mean(report.orders(which)))
        check('oracle_order_%s' % which, 0.7 <= order <= 1.3, order, 1.0)

    writer.writeRecords('verify_checks.csv', ('check', 'passed', 'value', 'tolerance'), checks)
    failed = [c[0] for c in checks if not c[1]]
    manifest.notes['failed'] = failed
    if not certPassed:
        manifest.notes['outcome'] = 'certificate failed'
        return CommandResult(EXIT_WELLPOSEDNESS, manifest)
    if failed:
        manifest.notes['outcome'] = 'verification failed'
        return CommandResult(EXIT_VERIFICATION, manifest)

    manifest.notes['outcome'] = 'all checks passed'
    return CommandResult(EXIT_OK, manifest)


def cmdOracle(args, writer):
    """Runs the discrete recursion for each N and its convergence report."""
    cfg = _loadConfig(args)
    p = cfg.params
    manifest = RunManifest.forConfig('oracle', cfg)
    watch = _Stopwatch(manifest)

    try:
        nList = sorted(int(n) for n in args['--n-list'].split(','))
    except ValueError:
        raise ConfigError("--n-list must be comma separated integers, got %r." % args['--n-list'])

    for N in nList:
        writer.writeTable('oracle_N%d.csv' % N, TABLE_HEADER, runDp(p, N).table())
    report = watch.time('convergence', convergenceReport, p, nList, cfg.gridSteps,
                        InitialLaw.fromParams(p), _workers(args))
    writer.writeTable('oracle_errors.csv', ERROR_HEADER, report.errorTable())
    writer.writeTable('oracle_diagnostics.csv', DIAGNOSTIC_HEADER, report.diagnosticTable())
    manifest.notes['orders'] = {w: report.orders(w) for w in ('errA', 'errB', 'errD', 'errF')}
    manifest.notes['maxRelationResidual'] = max(r.maxRelationResidual for r in report.rows)

    return CommandResult(EXIT_OK, manifest)


##
## Alpha threshold.
##

def certificatePasses(p):
    try:
        selectLambda(p)
    except NoPsdLambdaFound:
        return False
    return True


def solverFinite(p, g):
    try:
        solveB(p, g)
    except NonFiniteCoefficient:
        return False
    return True


def bisectAlpha(p, predicate, lo, hi, tol):
    """Largest alpha in [lo, hi] at which 'predicate' holds, assuming it
    holds below some threshold and fails above it.

    **Returns:**

    (threshold, bracketed); 'bracketed' is false if the predicate still
    holds at 'hi', in which case the threshold is reported as 'hi'.

    **Raises:**

    * BoundsDoNotBracket - if the predicate already fails at 'lo'"""
    if not predicate(p.replace(alpha=lo)):
        raise BoundsDoNotBracket("Check fails at the lower bound alpha=%g." % lo)
    if predicate(p.replace(alpha=hi)):
        return hi, False

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(p.replace(alpha=mid)):
            lo = mid
        else:
            hi = mid

    return lo, True


def cmdAlphaThreshold(args, writer):
    """Bisects on alpha for certificate success and for a finite B solve."""
    cfg = _loadConfig(args)
    p = cfg.params
    manifest = RunManifest.forConfig('alpha-threshold', cfg)

    if p.lam == 0.0:
        manifest.notes['result'] = 'no threshold required: lambda = 0'
        log.info("lambda = 0: well-posedness holds for every admissible alpha, no threshold required.")
        writer.writeRecords('alpha_threshold.csv', ('check', 'threshold', 'bracketed'),
                            [('certificate', 'none', False), ('solver', 'none', False)])
        return CommandResult(EXIT_OK, manifest)

    limit = p.beta
    if p.gamma1 > 0.0:
        limit = min(limit, (p.gamma2 * p.rho + p.lam) / p.gamma1)
    lo = float(args['--lo'])
    hi = float(args['--hi']) if args['--hi'] is not None else limit * (1.0 - 1e-9)
    tol = float(args['--tol'])
    if not 0.0 <= lo < hi < limit:
        raise BoundsDoNotBracket("Need 0 <= lo < hi < %g, got [%g, %g]." % (limit, lo, hi))

    g = TimeGrid.forParams(p, min(cfg.gridSteps, 2000))
    rows = []
    for name, predicate in (('certificate', certificatePasses),
                            ('solver', lambda q: solverFinite(q, g))):
        threshold, bracketed = bisectAlpha(p, predicate, lo, hi, tol)
        rows.append((name, threshold, bracketed))
        manifest.notes[name] = {'threshold': threshold, 'bracketed': bracketed}
        log.info("%s threshold: alpha %s %.6g", name, '~' if bracketed else '>=', threshold)

    writer.writeRecords('alpha_threshold.csv', ('check', 'threshold', 'bracketed'), rows)

    return CommandResult(EXIT_OK, manifest)


COMMANDS = {
    'solve': cmdSolve,
    'simulate': cmdSimulate,
    'figures': cmdFigures,
    'verify': cmdVerify,
    'oracle': cmdOracle,
    'alpha-threshold': cmdAlphaThreshold,
}


##
## Entry point.
##

def _exitCodeFor(error):
    if isinstance(error, (ConfigError, ModelError, InvalidGrid, SeedCollision, BoundsDoNotBracket)):
        return EXIT_CONFIG
    if isinstance(error, NoPsdLambdaFound):
        return EXIT_WELLPOSEDNESS
    if isinstance(error, LiquidationViolation):
        return EXIT_VERIFICATION
    if isinstance(error, (NonFiniteCoefficient, NonFinite, SingularDenominator)):
        return EXIT_BLOWUP
    return None


def main(argv=None):
    """Runs one command and returns its exit code."""
    args = docopt(__doc__, argv=argv, version='liqtools ' + __version__)

    logging.basicConfig(level=logging.DEBUG if args['--verbose'] else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)

    name = next(n for n in COMMANDS if args[n])
    writer = DirectoryWriter(args['--out'])
    try:
        result = COMMANDS[name](args, writer)
    except Exception as e:
        code = _exitCodeFor(e)
        if code is None:
            raise
        log.error("%s: %s", type(e).__name__, e)
        manifest = RunManifest(name)
        manifest.notes['error'] = {'type': type(e).__name__, 'message': str(e)}
        result = CommandResult(code, manifest)

    if result.manifest is not None:
        result.manifest.outputs = writer.written + ['manifest.json']
        writer.writeJson('manifest.json', result.manifest.toDict())

    return result.resultCode


class BoundsDoNotBracket(Exception):
    """Error raised when a bisection interval does not bracket a threshold."""
    pass
