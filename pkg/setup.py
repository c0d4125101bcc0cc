#!/usr/bin/env python
from setuptools import setup

import symred

long_description = '''
Symred checks approximate symmetries of the perturbed nonlinear wave
equation u_tt = [f(u) u_x]_x + eps [lambda(u) u_t]_xx.

It splits the equation in its order-0 and order-1 parts, computes the
Lie algebras of approximate symmetries for the exponential and power
nonlinearities, classifies their one-dimensional subalgebras and
verifies a catalog of invariant solutions numerically.
'''

description = ('Symred verifies approximate symmetry reductions of '
               'perturbed wave equations')
setup(name='Symred',
      version=symred.__version__,
      description=description,
      long_description=long_description,
      license='MIT',
      packages=['symred'],
      package_data={'symred': ['catalog.yaml']},
      install_requires=['numpy', 'scipy', 'pyyaml'],
      entry_points={
          'console_scripts': [
              'symred = symred.cli:cli',
          ],
      },
  )
