"""configsheet.py

Configuration layer: a property sheet with parent chaining for defaults,
a reader for the line-oriented `key = value` format and the schema that
turns the merged sheet into validated run settings.

Example file:

    # Figure 1, left panel
    gamma1 = 0.1
    gamma2 = 0.5
    rho = 0.7
    alpha = 0.5
    beta = 1.1
    lambda = 1.5
    T = 1
    sigma = 0.8
"""

import logging
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np
from schema import And, Optional, Schema, SchemaError, Use

from liqtools.model import ModelParams, SigmaSchedule, validateParams

log = logging.getLogger(__name__)

# Values used when the config file does not set them.
DEFAULTS = {
    'x0_mean': 1.0,
    'x0_var': 0.0,
    'y0': 0.0,
    'c0': 0.0,
    'grid_steps': 10000,
    'n_paths': 10000,
    'seed': 42,
}


class ConfigSheet(object):
    """A string-keyed property bag. Lookups that miss fall through to the
    parent sheet, so a defaults sheet can sit behind the sheet read from a
    file and be overridden key by key.

    NOTE: Once 'forceImmutable()' is called every mutating method raises
    ValueError."""

    def __init__(self, parent=None, properties=None, immutable=False):
        if parent is not None and not isinstance(parent, ConfigSheet):
            raise TypeError("'parent' must be a ConfigSheet or None.")

        self._parent = parent
        self._immutable = False
        self._properties = {}

        if properties:
            self.mergeProperties(properties)

        self._immutable = immutable

    def forceImmutable(self):
        """Forces the sheet to be immutable."""
        self._immutable = True

    def isImmutable(self):
        return self._immutable

    def mergeProperties(self, properties):
        """Merges the contents of a dictionary or sheet into this sheet.
        Only string keys are accepted."""
        if self._immutable:
            raise ValueError("Cannot merge properties. Config sheet is immutable.")

        if isinstance(properties, ConfigSheet):
            properties = properties._properties
        if not isinstance(properties, dict):
            raise TypeError("'properties' argument must be a ConfigSheet or a dictionary.")

        for k, v in properties.items():
            if not isinstance(k, str):
                raise KeyError("Key must be a string.")
            self._properties[k] = v

    def hasProperty(self, propertyKey):
        """True if this sheet or a parent holds the key."""
        if propertyKey in self._properties:
            return True

        return self._parent is not None and self._parent.hasProperty(propertyKey)

    def getProperty(self, propertyKey, default=None):
        """Returns the value for the key, looking through the parent chain,
        or 'default' if no sheet holds it."""
        if propertyKey in self._properties:
            return self._properties[propertyKey]
        if self._parent is not None:
            return self._parent.getProperty(propertyKey, default)

        return default

    def setProperty(self, propertyKey, propertyValue):
        if self._immutable:
            raise ValueError("Cannot set property. Config sheet is immutable.")
        if not isinstance(propertyKey, str):
            raise KeyError("Key must be a string.")

        self._properties[propertyKey] = propertyValue

    def clearProperty(self, propertyKey):
        """Removes the key from this sheet (the parent is untouched)."""
        if self._immutable:
            raise ValueError("Cannot clear property. Config sheet is immutable.")

        self._properties.pop(propertyKey, None)

    def toDict(self):
        """Returns a flattened copy, parent values first, then this sheet's
        overrides."""
        merged = self._parent.toDict() if self._parent is not None else {}
        merged.update(self._properties)
        return merged


##
## Readers.
##

class ConfigReader(metaclass=ABCMeta):
    """Abstract source of configuration properties."""

    @abstractmethod
    def readProperties(self, hints=None):
        """Returns a dictionary of raw (string) properties. 'hints' is an
        optional dictionary of reader-specific options."""
        pass


class KeyValueFileReader(ConfigReader):
    """Reads `key = value` lines. Blank lines and lines starting with '#'
    are skipped; text after a '#' is a comment."""

    def __init__(self, path):
        self._path = path

    def readProperties(self, hints=None):
        with open(self._path, 'r', encoding='utf-8') as f:
            return parseKeyValueText(f.read(), source=str(self._path))


def parseKeyValueText(text, source='<text>'):
    """Parses `key = value` text into a dictionary of strings."""
    properties = {}
    for lineNo, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError("%s:%d: expected 'key = value'." % (source, lineNo))

        key, value = (part.strip() for part in line.split('=', 1))
        if not key or not value:
            raise ConfigError("%s:%d: empty key or value." % (source, lineNo))
        if key in properties:
            raise ConfigError("%s:%d: duplicate key '%s'." % (source, lineNo, key))
        properties[key] = value

    return properties


##
## Schema.
##

def parseSigma(text):
    """Parses a sigma setting: a single number, or comma separated
    'breakpoint:value' pairs starting at 0."""
    if isinstance(text, (int, float)):
        return SigmaSchedule.constant(text)

    parts = [p.strip() for p in str(text).split(',') if p.strip()]
    if len(parts) == 1 and ':' not in parts[0]:
        return SigmaSchedule.constant(float(parts[0]))

    pairs = [tuple(float(x) for x in p.split(':')) for p in parts]
    if any(len(pair) != 2 for pair in pairs):
        raise ValueError("sigma pairs must be 'breakpoint:value'.")

    return SigmaSchedule(tuple(b for b, _ in pairs), tuple(v for _, v in pairs))


_number = And(Use(float), np.isfinite, error="must be a finite number")

CONFIG_SCHEMA = Schema({
    'gamma1': _number,
    'gamma2': _number,
    'rho': _number,
    'alpha': _number,
    'beta': _number,
    'lambda': _number,
    'T': _number,
    'sigma': Use(parseSigma, error="sigma must be a number or 'breakpoint:value' pairs"),
    Optional('x0_mean'): _number,
    Optional('x0_var'): _number,
    Optional('y0'): _number,
    Optional('c0'): _number,
    Optional('grid_steps'): And(Use(int), lambda n: n >= 2, error="grid_steps must be an integer >= 2"),
    Optional('n_paths'): And(Use(int), lambda n: n >= 1, error="n_paths must be an integer >= 1"),
    Optional('seed'): And(Use(int), lambda s: 0 <= s < 2 ** 64, error="seed must be an unsigned 64 bit integer"),
})


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters plus run settings."""
    params: ModelParams
    gridSteps: int
    nPaths: int
    seed: int


def defaultsSheet():
    """Returns an immutable sheet holding DEFAULTS."""
    return ConfigSheet(properties=dict(DEFAULTS), immutable=True)


def configFromSheet(sheet):
    """Validates a sheet against CONFIG_SCHEMA and the standing
    assumptions and returns a RunConfig.

    **Raises:**

    * ConfigError - unknown, missing or malformed keys
    * ModelError - a standing assumption failed"""
    try:
        values = CONFIG_SCHEMA.validate(sheet.toDict())
    except SchemaError as e:
        raise ConfigError(str(e.code)) from e

    params = ModelParams(
        gamma1=values['gamma1'], gamma2=values['gamma2'], rho=values['rho'],
        alpha=values['alpha'], beta=values['beta'], lam=values['lambda'],
        T=values['T'], sigma=values['sigma'],
        x0Mean=values['x0_mean'], x0Var=values['x0_var'],
        y0=values['y0'], c0=values['c0'],
    )

    return RunConfig(validateParams(params), values['grid_steps'], values['n_paths'], values['seed'])


def loadConfig(path, overrides=None):
    """Reads, merges with defaults and validates a config file.

    **Parameters:**

    * path - config file path
    * overrides - optional dictionary applied on top of the file (CLI flags)

    **Returns:**

    A RunConfig."""
    try:
        properties = KeyValueFileReader(path).readProperties()
    except OSError as e:
        raise ConfigError("Cannot read config '%s': %s" % (path, e)) from e

    sheet = ConfigSheet(defaultsSheet(), properties)
    if overrides:
        sheet.mergeProperties({k: v for k, v in overrides.items() if v is not None})
    log.debug("Config %s: %d keys read.", path, len(properties))

    return configFromSheet(sheet)


class ConfigError(Exception):
    """Error raised when a config file cannot be read or fails validation."""
    pass
