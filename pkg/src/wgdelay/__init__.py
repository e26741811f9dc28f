"""Collective decay of emitters in a bidirectional waveguide with propagation delay.

Submodules: ``tensor_core`` (dense kernels), ``mps`` (matrix product states),
``collision`` (collision-model stepper), ``markov`` (master-equation
reference), ``observables`` and ``cli``.
"""

__version__ = "0.1.0"
