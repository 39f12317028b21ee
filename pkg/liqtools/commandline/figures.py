"""figures.py

Parameter sets of the three numerical studies and the runs behind them.
Every panel of a figure is simulated on the same Brownian path (path 0
of the run seed) and overlaid with the Obizhaeva-Wang reference, the
model without child flow, risk aversion or noise.

CSV is the source of truth; the SVG is a view of the same numbers."""

import logging
from dataclasses import dataclass

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from liqtools.model import InitialLaw, ModelParams, SigmaSchedule, validateParams
from liqtools.riccati import TimeGrid, solveCoefficients
from liqtools.simulate import owReferenceParams, simulateOptimal, solveMeanPath

log = logging.getLogger(__name__)

# Fixed so that reruns give byte-identical SVG element ids.
matplotlib.rcParams['svg.hashsalt'] = 'liqtools'

TRAJECTORY_HEADER = ('t', 'X', 'X_mean', 'X_ow')

_BASE = dict(T=1.0, sigma=SigmaSchedule.constant(0.8), x0Mean=1.0)

FIGURE_SETS = {
    1: (('left', dict(gamma1=0.1, gamma2=0.5, rho=0.7, alpha=0.5, beta=1.1, lam=1.5)),
        ('right', dict(gamma1=0.1, gamma2=0.5, rho=0.7, alpha=0.5, beta=1.1, lam=0.0))),
    2: (('left', dict(gamma1=0.1, gamma2=0.5, rho=0.4, alpha=0.0, beta=3.0, lam=0.0)),
        ('right', dict(gamma1=0.1, gamma2=0.5, rho=0.4, alpha=1.8, beta=3.0, lam=0.0))),
    3: (('left', dict(gamma1=0.1, gamma2=2.0, rho=0.7, alpha=0.5, beta=1.1, lam=0.0)),
        ('right', dict(gamma1=0.1, gamma2=0.3, rho=0.7, alpha=0.5, beta=1.1, lam=0.0))),
}

TITLES = {1: 'risk aversion', 2: 'child order excitation', 3: 'instantaneous impact'}


def figureParams(which):
    """Returns ((panel, ModelParams), ...) for figure 1, 2 or 3."""
    if which not in FIGURE_SETS:
        raise ValueError("Figure must be one of 1, 2, 3, got %r." % (which,))

    return tuple((panel, validateParams(ModelParams(**dict(_BASE, **values))))
                 for panel, values in FIGURE_SETS[which])


@dataclass(frozen=True, eq=False)
class PanelRun:
    """One simulated panel: the common-path inventory, its mean and the
    reference, each with a 0- row first and a T row last."""
    panel: str
    params: ModelParams
    t: np.ndarray
    X: np.ndarray
    XMean: np.ndarray
    XReference: np.ndarray

    def table(self):
        return np.column_stack([self.t, self.X, self.XMean, self.XReference])


def _withJumps(nodes, x0, values, after):
    return np.concatenate([[x0], values, [after]]), np.concatenate([[nodes[0]], nodes, [nodes[-1]]])


def runPanel(panel, p, seed, steps, workers=1):
    """Solves and simulates one panel on path 0 of 'seed'."""
    g = TimeGrid.forParams(p, steps)
    law = InitialLaw.fromParams(p)

    coeffs = solveCoefficients(p, g)
    mean = solveMeanPath(p, coeffs, law)
    ensemble = simulateOptimal(p, coeffs, mean, law, 1, seed, workers=workers)

    ow = owReferenceParams(p)
    owMean = solveMeanPath(ow, solveCoefficients(ow, g), InitialLaw.fromParams(ow))

    X, t = _withJumps(g.nodes, law.mean[0], ensemble.X[0], ensemble.terminalX[0])
    XMean, _ = _withJumps(g.nodes, law.mean[0], mean.X, mean.terminalInventory())
    XRef, _ = _withJumps(g.nodes, law.mean[0], owMean.X, owMean.terminalInventory())
    log.info("Figure panel %s: inventory range [%.4g, %.4g]", panel, np.min(X), np.max(X))

    return PanelRun(panel, p, t, X, XMean, XRef)


def runFigure(which, seed, steps, workers=1):
    """Runs every panel of a figure with the same seed."""
    return [runPanel(panel, p, seed, steps, workers) for panel, p in figureParams(which)]


def renderFigure(which, panels):
    """Draws the panels side by side and returns the matplotlib figure."""
    fig, axes = plt.subplots(1, len(panels), figsize=(10.0, 3.6), sharey=True)
    for ax, run in zip(np.atleast_1d(axes), panels):
        ax.step(run.t, run.X, where='post', lw=1.2, label='optimal (common path)')
        ax.plot(run.t, run.XMean, lw=1.0, ls='--', label='mean')
        ax.step(run.t, run.XReference, where='post', lw=1.0, ls=':', color='k', label='Obizhaeva-Wang')
        ax.axhline(0.0, color='0.6', lw=0.5)
        ax.set_title(run.panel)
        ax.set_xlabel('t')
        ax.grid(alpha=0.3)
    np.atleast_1d(axes)[0].set_ylabel('inventory')
    np.atleast_1d(axes)[0].legend(fontsize='small')
    fig.suptitle('Optimal position, varying %s' % TITLES[which])
    fig.tight_layout()

    return fig


def closeFigure(fig):
    plt.close(fig)
