from setuptools import setup

setup(
  name = 'liqtools',
  packages = ['liqtools', 'liqtools.python', 'liqtools.model', 'liqtools.riccati',
              'liqtools.wellposedness', 'liqtools.simulate', 'liqtools.cost',
              'liqtools.oracle', 'liqtools.commandline'],
  version = '0.2.0', # keep in step with liqtools.__version__
  description = 'Solver and simulator for mean-field optimal liquidation with transient impact.',
  author = 'Jack William Bell',
  author_email = 'jackwilliambell@gmail.com',
  keywords = ['optimal execution', 'riccati', 'mean-field control', 'monte carlo'],
  python_requires = '>=3.8',
  install_requires = ['numpy>=1.20', 'scipy>=1.6', 'docopt>=0.6.2', 'schema>=0.7', 'matplotlib>=3.3'],
  entry_points = {'console_scripts': ['liqtools=liqtools.commandline:main']},
  classifiers = [],
)
