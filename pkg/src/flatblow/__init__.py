"""Numerical toolkit for slow-fast systems with flat slow manifolds.

Submodules: ``odecore`` (integrators and events), ``charts`` (weighted
blowups), ``flatten`` (q-augmentation), ``systems`` (model catalog),
``asymptotics`` (closed forms and erfcx), ``maps`` (section maps and canard
bisection), ``experiments`` and ``expcli`` (acceptance runs and CLI).
"""

from .odecore import EventSpec, IntegratorConfig, OdeSystem, Trajectory, integrate

__version__ = "0.1.0"

__all__ = ["EventSpec", "IntegratorConfig", "OdeSystem", "Trajectory", "integrate", "__version__"]
