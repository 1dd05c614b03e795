"""Event-driven simulator for a two-mass deformable bouncing ball.

Submodules: ``core`` (state and parameters), ``flight`` (closed-form
airborne propagation), ``sticky`` (persistent floor contact), ``engine``
(the event loop), ``nonlinear`` (power-law spring/damper variant),
``rigid`` (restitution-based reference model and its iterated maps),
``analysis`` (estimators over simulation logs), ``scenario`` (config and
CSV persistence), ``cli`` (command line entry point).
"""

__version__ = "0.1.0"
