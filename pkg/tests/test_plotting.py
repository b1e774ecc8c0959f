import hashlib

import numpy as np

from nullgeo import plotting
from nullgeo.holonomy import HolonomyElement


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.md5(fh.read()).hexdigest()


def _figures():
    names = ["a", "b", "c"]
    els = [HolonomyElement("l1", np.eye(2), 0.0), HolonomyElement("l2", np.array([[1.0, 0.5], [0.0, 2.0]]), 0.0)]
    return {
        "lambda": lambda: plotting.lambda_table(names, [-1.0, -0.5, -0.2], [0.0, 1e-12, 3e-9], 1e-5),
        "bars": lambda: plotting.residual_bars({"x": {"a": 1e-9, "b": 0.0}, "y": {"c": 1e-3}}, {"x": 1e-6}, "r"),
        "holonomy": lambda: plotting.holonomy_matrices(els),
        "profile": lambda: plotting.scalar_profile(names, [1.0, 0.25, 0.04], "factor"),
    }


def test_figures_render_and_are_reproducible(tmp_path):
    for stem, build in _figures().items():
        first = plotting.save(build(), tmp_path / "one", stem)
        second = plotting.save(build(), tmp_path / "two", stem)
        assert open(first, "rb").read(8) == b"\x89PNG\r\n\x1a\n"
        assert _digest(first) == _digest(second)


def test_empty_holonomy_figure(tmp_path):
    path = plotting.save(plotting.holonomy_matrices([]), tmp_path, "empty")
    assert (tmp_path / "empty.png").exists() and path.endswith("empty.png")
