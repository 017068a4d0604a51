"""Axisymmetric FEM simulator of endocardiac RF ablation.

Couples a quasi-static electric potential problem to transient bioheat
transport under either classical parabolic conduction or a single-relaxation
hyperbolic law, on a shared triangle mesh of an electrode / cardiac muscle /
blood-pool assembly.
"""

__version__ = "0.1.0"
