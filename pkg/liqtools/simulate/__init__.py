"""
# Simulate

Forward generation of strategies and state paths.

Every strategy simulated here is affine in the state and its mean:

    initial jump   dZ0 = k0dev (X - E) + k0mean E + k0
    interior       dZ  = (kdev(t) (X - E) + kmean(t) E + k(t)) dt + l(t) dW
    terminal block dZT = X(T-)

The optimal strategy is the member whose gains come from the feedback
coefficients I^A, I^B, I^D. Because the mean dynamics close under affine
feedback, the mean path E is solved once, deterministically, and each
path only simulates its deviation from it.

## Conventions

* Euler-Maruyama on the uniform grid; jumps only at the first and last node
* Node 0 of a path holds the post-jump state; the pre-jump state is kept
  separately. Node N holds the state at T-
* Path i draws its initial state and Brownian increments from the stream
  keyed by (seed, i)
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from liqtools.model import buildStateMatrices, validateParams, SigmaSchedule
from liqtools.riccati import InvalidGrid, feedbackOnGrid
from liqtools.simulate.streams import SeedCollision, drawStandardNormals

log = logging.getLogger(__name__)

# Residual inventory above which a strategy without terminal block is
# rejected.
LIQUIDATION_TOLERANCE = 1e-12


##
## Strategies.
##

@dataclass(frozen=True, eq=False)
class AffineStrategySpec:
    """Gains of an affine strategy, tabulated on a grid. Node-indexed
    arrays have one row per grid node."""
    grid: object
    jumpDevGain: np.ndarray
    jumpMeanGain: np.ndarray
    jumpConst: float
    driftDevGain: np.ndarray
    driftMeanGain: np.ndarray
    driftConst: np.ndarray
    diffusionLoading: np.ndarray
    terminalBlock: bool = True
    label: str = 'affine'

    def __post_init__(self):
        n = self.grid.nSteps + 1
        shapes = {'jumpDevGain': (3,), 'jumpMeanGain': (3,), 'driftDevGain': (n, 3),
                  'driftMeanGain': (n, 3), 'driftConst': (n,), 'diffusionLoading': (n,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError("'%s' must have shape %s, got %s." % (name, shape, arr.shape))
            if not np.all(np.isfinite(arr)):
                raise NonFinite("Strategy gain '%s' is not finite." % name)
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.jumpConst):
            raise NonFinite("Strategy gain 'jumpConst' is not finite.")

    def scaled(self, drift=1.0, diffusion=1.0, label=None):
        """Returns a copy with the interior drift gains and the diffusion
        loading multiplied by the passed factors."""
        return replace(self, driftDevGain=drift * self.driftDevGain,
                       driftMeanGain=drift * self.driftMeanGain,
                       driftConst=drift * self.driftConst,
                       diffusionLoading=diffusion * self.diffusionLoading,
                       label=label or '%s*drift%g*diffusion%g' % (self.label, drift, diffusion))


def optimalSpec(p, coeffs, grid=None):
    """The optimal strategy as an AffineStrategySpec on 'grid' (default:
    the coefficient grid).

    **Parameters:**

    * p - validated ModelParams
    * coeffs - CoefficientPaths
    * grid - optional simulation TimeGrid inside the coefficient grid"""
    grid = grid or coeffs.grid
    fb = feedbackOnGrid(coeffs) if grid == coeffs.grid else feedbackOnGrid(coeffs, grid.nodes)
    sm = buildStateMatrices(p)
    at, a = p.aTilde, p.a

    return AffineStrategySpec(
        grid=grid,
        jumpDevGain=-fb.IA[0] / at,
        jumpMeanGain=-fb.IB[0] / a,
        jumpConst=float(-fb.ID[0] / a),
        driftDevGain=-(fb.dIA + fb.IA @ sm.H) / at,
        driftMeanGain=-(fb.dIB + fb.IB @ (sm.H + sm.Hbar)) / a,
        driftConst=-(fb.dID + fb.IB @ sm.G) / a,
        diffusionLoading=-fb.IA[:, 1] * p.sigma(grid.nodes) / at,
        terminalBlock=True,
        label='optimal',
    )


def _zeroSpec(grid, label, jumpGain):
    n = grid.nSteps + 1
    return AffineStrategySpec(grid, jumpGain, jumpGain, 0.0, np.zeros((n, 3)), np.zeros((n, 3)),
                              np.zeros(n), np.zeros(n), True, label)


def terminalBlockSpec(grid):
    """No trading before T, then one block of the whole position."""
    return _zeroSpec(grid, 'terminal-block', np.zeros(3))


def immediateBlockSpec(grid):
    """Sells the whole position at time 0."""
    return _zeroSpec(grid, 'immediate-block', np.array([1.0, 0.0, 0.0]))


def owReferenceParams(p):
    """The Obizhaeva-Wang reference: same gamma2, rho, horizon and initial
    position, with alpha = beta = sigma = lambda = 0."""
    return validateParams(p.replace(alpha=0.0, beta=0.0, lam=0.0, sigma=SigmaSchedule.constant(0.0)))


##
## Mean path.
##

@dataclass(frozen=True, eq=False)
class MeanPath:
    """Deterministic mean of the state and of the cumulative strategy."""
    grid: object
    Eminus: np.ndarray
    E: np.ndarray
    EZ: np.ndarray
    rate: np.ndarray
    jump0: float
    jumpT: float

    @property
    def X(self):
        return self.E[:, 0]

    def terminalInventory(self):
        """Mean inventory after the terminal block."""
        return self.E[-1, 0] - self.jumpT


def meanPathForSpec(p, spec, law):
    """Integrates the mean dynamics induced by an affine spec with the
    Euler scheme used for the paths."""
    sm = buildStateMatrices(p)
    grid = spec.grid
    h, N = grid.h, grid.nSteps
    drift = sm.H + sm.Hbar

    E = np.empty((N + 1, 3))
    EZ = np.empty(N + 1)
    rate = np.empty(N + 1)

    jump0 = float(spec.jumpMeanGain @ law.mean + spec.jumpConst)
    E[0] = law.mean + sm.K * jump0
    EZ[0] = jump0
    for n in range(N):
        rate[n] = spec.driftMeanGain[n] @ E[n] + spec.driftConst[n]
        E[n + 1] = E[n] + (drift @ E[n] + sm.G) * h + sm.K * (rate[n] * h)
        EZ[n + 1] = EZ[n] + rate[n] * h
    rate[N] = spec.driftMeanGain[N] @ E[N] + spec.driftConst[N]

    if not (np.all(np.isfinite(E)) and np.all(np.isfinite(EZ))):
        raise NonFinite("Mean path is not finite.")

    jumpT = float(E[N, 0]) if spec.terminalBlock else 0.0

    return MeanPath(grid, np.array(law.mean), E, EZ, rate, jump0, jumpT)


def solveMeanPath(p, coeffs, law, g=None):
    """Mean path of the optimal strategy: mean initial jump
    -(I^B mean + I^D)/a, then the closed mean dynamics, then the mean
    terminal block."""
    return meanPathForSpec(p, optimalSpec(p, coeffs, g), law)


##
## Path ensembles.
##

@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Simulated paths. X, Y and Z have one row per path and one column per
    node; C is shared by all paths."""
    grid: object
    nPaths: int
    seed: int
    label: str
    stateMinus: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    C: np.ndarray
    Z: np.ndarray
    dW: np.ndarray
    jump0: np.ndarray
    jumpT: np.ndarray
    diffusionLoading: np.ndarray
    sigmaNodes: np.ndarray
    mean: MeanPath
    terminalBlock: bool
    gamma2: float

    @property
    def terminalX(self):
        """Inventory after the terminal block."""
        return self.X[:, -1] - self.jumpT

    @property
    def terminalY(self):
        """Impact after the terminal block."""
        return self.Y[:, -1] + self.gamma2 * self.jumpT

    def deviation(self):
        """(X - E_X, Y - E_Y, 0) at every node, shape (paths, nodes, 3)."""
        dev = np.zeros(self.X.shape + (3,))
        dev[..., 0] = self.X - self.mean.E[:, 0]
        dev[..., 1] = self.Y - self.mean.E[:, 1]
        return dev


def simulateAffine(p, spec, law, nPaths, seed, g=None, workers=1, mean=None):
    """Simulates an affine strategy.

    **Parameters:**

    * p - validated ModelParams
    * spec - AffineStrategySpec
    * law - InitialLaw; the child flow must be deterministic
    * nPaths, seed - ensemble size and run seed
    * g - optional TimeGrid, must equal the spec grid
    * workers - threads used to draw the random streams
    * mean - optional precomputed mean path of this spec

    **Returns:**

    A PathEnsemble.

    **Raises:**

    * LiquidationViolation - terminal block off and inventory left at T"""
    grid = spec.grid
    if g is not None and g != grid:
        raise InvalidGrid("Simulation grid must match the strategy grid.")
    if np.any(law.cov[2]):
        raise ValueError("The initial child flow must be deterministic.")

    sm = buildStateMatrices(p)
    mean = mean if mean is not None else meanPathForSpec(p, spec, law)
    h, N = grid.h, grid.nSteps
    sqrtH = np.sqrt(h)
    sig = np.asarray(p.sigma(grid.nodes), dtype=float)

    initial, increments = drawStandardNormals(seed, range(nPaths), N, workers)
    dW = increments * sqrtH

    stateMinus = law.sample(initial)
    dev = stateMinus - law.mean
    jumpDev = dev @ spec.jumpDevGain
    dev = dev + np.outer(jumpDev, sm.K)

    X = np.empty((nPaths, N + 1))
    Y = np.empty((nPaths, N + 1))
    Z = np.empty((nPaths, N + 1))
    X[:, 0] = mean.E[0, 0] + dev[:, 0]
    Y[:, 0] = mean.E[0, 1] + dev[:, 1]
    zDev = jumpDev
    Z[:, 0] = mean.EZ[0] + zDev

    for n in range(N):
        dZdev = (dev @ spec.driftDevGain[n]) * h + spec.diffusionLoading[n] * dW[:, n]
        dev = dev + (dev @ sm.H.T) * h + np.outer(dZdev, sm.K)
        dev[:, 1] += sig[n] * dW[:, n]
        zDev = zDev + dZdev

        X[:, n + 1] = mean.E[n + 1, 0] + dev[:, 0]
        Y[:, n + 1] = mean.E[n + 1, 1] + dev[:, 1]
        Z[:, n + 1] = mean.EZ[n + 1] + zDev

    if not (np.all(np.isfinite(X[:, -1])) and np.all(np.isfinite(Y[:, -1]))):
        raise NonFinite("Simulated paths are not finite.")

    if spec.terminalBlock:
        jumpT = X[:, -1].copy()
    else:
        jumpT = np.zeros(nPaths)
        left = float(np.max(np.abs(X[:, -1]))) if nPaths else 0.0
        if left > LIQUIDATION_TOLERANCE * max(1.0, abs(p.x0Mean)):
            raise LiquidationViolation("Strategy '%s' leaves inventory %.6g at T." % (spec.label, left))

    log.debug("Simulated %d paths of '%s' on %d steps.", nPaths, spec.label, N)

    return PathEnsemble(grid, nPaths, int(seed), spec.label, stateMinus, X, Y, mean.E[:, 2].copy(), Z,
                        dW, mean.jump0 + jumpDev, jumpT, spec.diffusionLoading.copy(), sig, mean,
                        spec.terminalBlock, p.gamma2)


def simulateOptimal(p, coeffs, mean, law, nPaths, seed, g=None, workers=1):
    """Simulates the optimal strategy given its solved mean path."""
    spec = optimalSpec(p, coeffs, g or mean.grid)
    return simulateAffine(p, spec, law, nPaths, seed, workers=workers, mean=mean)


##
## First-order conditions.
##

@dataclass(frozen=True, eq=False)
class FocResiduals:
    """Residuals of the two first-order conditions on [0, T)."""
    rMean: np.ndarray
    rDev: np.ndarray

    @property
    def supMean(self):
        return float(np.max(np.abs(self.rMean)))

    @property
    def supDev(self):
        return float(np.max(np.abs(self.rDev))) if self.rDev.size else 0.0


def focResiduals(ensemble, coeffs):
    """Evaluates I^B E + I^D on the mean path and I^A (S - E) on every
    path, at the nodes of [0, T)."""
    grid = ensemble.grid
    fb = feedbackOnGrid(coeffs) if grid == coeffs.grid else feedbackOnGrid(coeffs, grid.nodes)
    E = ensemble.mean.E

    rMean = np.einsum('ij,ij->i', fb.IB, E) + fb.ID
    dev = ensemble.deviation()
    rDev = np.einsum('pij,ij->pi', dev, fb.IA)

    return FocResiduals(rMean[:-1], rDev[:, :-1])


##
## Summaries.
##

SUMMARY_HEADER = ('t', 'X_mean', 'X_sd', 'X_q05', 'X_q95', 'Y_mean', 'C', 'Z_mean')


def ensembleSummary(ensemble):
    """Summary table: a row for 0-, one per node (node N is T-), and a row
    for T after the terminal block."""
    def row(t, x, y, c, z):
        sd = float(np.std(x, ddof=1)) if len(x) > 1 and np.ptp(x) > 0.0 else 0.0
        q05, q95 = np.quantile(x, [0.05, 0.95])
        return [t, float(np.mean(x)), sd, float(q05), float(q95), float(np.mean(y)), c, float(np.mean(z))]

    nodes = ensemble.grid.nodes
    rows = [row(nodes[0], ensemble.stateMinus[:, 0], ensemble.stateMinus[:, 1],
                ensemble.mean.Eminus[2], np.zeros(ensemble.nPaths))]
    for n, t in enumerate(nodes):
        rows.append(row(t, ensemble.X[:, n], ensemble.Y[:, n], ensemble.C[n], ensemble.Z[:, n]))
    rows.append(row(nodes[-1], ensemble.terminalX, ensemble.terminalY, ensemble.C[-1],
                    ensemble.Z[:, -1] + ensemble.jumpT))

    return np.array(rows, dtype=float)


##
## Errors.
##

class NonFinite(Exception):
    """Error raised when a simulated quantity stops being finite."""
    pass


class LiquidationViolation(Exception):
    """Error raised when a strategy without terminal block leaves
    inventory at T."""
    pass
