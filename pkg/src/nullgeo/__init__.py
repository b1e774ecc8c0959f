"""Numerical geometry of lightlike hypersurfaces.

Submodules:

* :mod:`nullgeo.expr` expression parser for metric and immersion entries
* :mod:`nullgeo.ambient` ambient semi-Riemannian manifold in one chart
* :mod:`nullgeo.hypersurface` induced metric, radical, screen, normalizing pair
* :mod:`nullgeo.induced` second fundamental form, umbilicity, induced connection
* :mod:`nullgeo.weyl` Weyl connection built from an umbilic factor
* :mod:`nullgeo.holonomy` parallel transport, holonomy, reconstruction
* :mod:`nullgeo.golden` frozen fixtures with expected values
* :mod:`nullgeo.cli` command-line front end
"""

__version__ = "0.1.0"
