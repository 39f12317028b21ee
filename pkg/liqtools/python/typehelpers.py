"""typehelpers.py

Helper functions for checking numeric arguments. Most of these could be
inlined, but the solvers check the same handful of things over and over
and reading 'isFiniteNum(x)' beats reading the expression it stands for.

NOTE: Numpy scalars count as numbers. Bools never do."""

import numbers

import numpy as np


def isBool(val):
    """Returns true if the passed value is a Python or numpy boolean,
    otherwise false.

    **Parameters:**

    * val - value to test

    **Returns:**

    True if the passed value is a boolean, otherwise false."""
    return isinstance(val, (bool, np.bool_))


def isNum(val):
    """Returns true if the passed value is a real numeric value,
    otherwise false. Does not return true for bool type values.

    **Parameters:**

    * val - value to test

    **Returns:**

    True if the passed value is a real number, otherwise false."""
    if not isBool(val):
        return isinstance(val, numbers.Real)

    return False


def isIntNum(val):
    """Returns true if the passed value is an integer value, including
    floats with no decimal places, otherwise false.

    **Parameters:**

    * val - value to test

    **Returns:**

    True if the passed value is an integer value, otherwise false."""
    if isNum(val):
        if isinstance(val, numbers.Integral):
            return True

        # Is it a whole float?
        return float(val).is_integer()

    return False


def isFiniteNum(val):
    """Returns true if the passed value is a finite real number."""
    return isNum(val) and bool(np.isfinite(val))


def isFiniteArray(val):
    """Returns true if every entry of the passed array-like value is
    finite, otherwise false. Empty arrays are finite."""
    try:
        return bool(np.all(np.isfinite(np.asarray(val, dtype=float))))
    except (TypeError, ValueError):
        return False


def requireNum(name, val):
    """Returns the passed value as a float, raising TypeError if
    it is not a finite real number.

    **Parameters:**

    * name - argument name used in the error message
    * val - value to check

    **Returns:**

    The value as a Python float."""
    if not isFiniteNum(val):
        raise TypeError("'%s' must be a finite number, got %r." % (name, val))

    return float(val)


def requirePositiveInt(name, val, minimum=1):
    """Returns the passed value as an int, raising ValueError if it is
    not an integer value of at least 'minimum'."""
    if not isIntNum(val) or int(val) < minimum:
        raise ValueError("'%s' must be an integer >= %d, got %r." % (name, minimum, val))

    return int(val)
