"""integrators.py

Fixed-step classical RK4 run backward from the terminal time, and the
cubic Hermite interpolation used to feed one solved system into another
at RK4 stage points.

Every right-hand side here has the signature rhs(t, y, u) where 'u' is
the (optional) value of an input path at the stage time."""

import logging

import numpy as np
from scipy.interpolate import CubicHermiteSpline

log = logging.getLogger(__name__)


class StageInputs(object):
    """Values of an already solved path at grid nodes and at the midpoints
    of every step, which is all a fixed-step RK4 ever asks for."""

    def __init__(self, atNodes, atMidpoints):
        self.atNodes = np.asarray(atNodes, dtype=float)
        self.atMidpoints = np.asarray(atMidpoints, dtype=float)

        if len(self.atMidpoints) != len(self.atNodes) - 1:
            raise ValueError("Need exactly one midpoint value per step.")

    @staticmethod
    def fromHermite(nodes, values, slopes):
        """Builds stage inputs from node values and their time derivatives
        by cubic Hermite interpolation."""
        spline = CubicHermiteSpline(nodes, values, slopes, axis=0)
        midpoints = 0.5 * (nodes[:-1] + nodes[1:])

        return StageInputs(values, spline(midpoints))


def rk4Backward(rhs, terminal, nodes, inputs=None, onNonFinite=None):
    """Integrates dy/dt = rhs(t, y, u) backward from y(nodes[-1]) =
    terminal over the uniform grid 'nodes'.

    **Parameters:**

    * rhs - right-hand side, returns an array shaped like y
    * terminal - value at the last node
    * nodes - increasing grid times
    * inputs - optional StageInputs consumed by the right-hand side
    * onNonFinite - callable(t) returning the exception to raise when a
      value stops being finite

    **Returns:**

    A tuple (values, slopes) of arrays with one row per node; slopes are
    the right-hand side evaluated at the node values."""
    nodes = np.asarray(nodes, dtype=float)
    y = np.array(terminal, dtype=float)
    n = len(nodes) - 1

    values = np.empty((n + 1,) + y.shape)
    slopes = np.empty((n + 1,) + y.shape)

    def u(kind, i):
        if inputs is None:
            return None
        return inputs.atNodes[i] if kind == 'node' else inputs.atMidpoints[i]

    values[n] = y
    for i in range(n, 0, -1):
        t1 = nodes[i]
        h = nodes[i - 1] - t1  # negative
        uEnd, uMid, uStart = u('node', i), u('mid', i - 1), u('node', i - 1)

        k1 = rhs(t1, y, uEnd)
        k2 = rhs(t1 + 0.5 * h, y + 0.5 * h * k1, uMid)
        k3 = rhs(t1 + 0.5 * h, y + 0.5 * h * k2, uMid)
        k4 = rhs(t1 + h, y + h * k3, uStart)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(y)):
            log.warning("Non-finite value at t=%.6g while integrating backward.", nodes[i - 1])
            if onNonFinite is not None:
                raise onNonFinite(nodes[i - 1])
            raise FloatingPointError("Non-finite value at t=%r." % nodes[i - 1])

        values[i - 1] = y
        slopes[i] = k1

    slopes[0] = rhs(nodes[0], values[0], u('node', 0))

    return values, slopes


def cumulativeSimpsonBackward(atNodes, atMidpoints, nodes):
    """Returns F with F(nodes[-1]) = 0 and F(nodes[i]) equal to the
    composite Simpson integral of the driver over [nodes[i], nodes[-1]],
    one Simpson panel per step using the step midpoint."""
    h = np.diff(nodes)
    panels = (h / 6.0) * (atNodes[:-1] + 4.0 * atMidpoints + atNodes[1:])
    out = np.zeros(len(nodes))
    out[:-1] = np.cumsum(panels[::-1])[::-1]

    return out
