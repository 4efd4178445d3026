"""Target states of the benchmark experiments."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class TargetFunction:
    """A desired state evaluated on point arrays of shape (n, dim)."""

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    known_harmonic: bool = False
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    harmonic_part: Optional["TargetFunction"] = None
    dim: Optional[int] = None  # None: defined in any dimension

    def __call__(self, x):
        return self.evaluate(np.atleast_2d(x))


def constant(value):
    value = float(value)
    return TargetFunction(
        name="const:{:g}".format(value),
        evaluate=lambda x: np.full(x.shape[0], value),
        known_harmonic=True,
        gradient=lambda x: np.zeros_like(x),
    )


def _harm2d(x):
    return x[:, 0] ** 3 - 3.0 * x[:, 0] * x[:, 1] ** 2


def _harm2d_grad(x):
    return np.column_stack([3.0 * x[:, 0] ** 2 - 3.0 * x[:, 1] ** 2,
                            -6.0 * x[:, 0] * x[:, 1]])


def _harm3d(x):
    return x[:, 0] ** 2 - 0.5 * x[:, 1] ** 2 - 0.5 * x[:, 2] ** 2


def _harm3d_grad(x):
    return np.column_stack([2.0 * x[:, 0], -x[:, 1], -x[:, 2]])


def _bubble(t):
    return t ** 2 * (1.0 - t) ** 2


def _bubble_dd(t):
    return 2.0 - 12.0 * t + 12.0 * t ** 2


def laplacian_of_bubble(x):
    """Laplacian of prod_i x_i^2 (1 - x_i)^2 on the unit cube."""
    q = _bubble(x)
    qdd = _bubble_dd(x)
    return (qdd[:, 0] * q[:, 1] * q[:, 2]
            + q[:, 0] * qdd[:, 1] * q[:, 2]
            + q[:, 0] * q[:, 1] * qdd[:, 2])


HARM2D = TargetFunction("harm2d", _harm2d, True, _harm2d_grad, dim=2)
HARM3D = TargetFunction("harm3d", _harm3d, True, _harm3d_grad, dim=3)
NONHARM3D = TargetFunction(
    "nonharm3d",
    lambda x: _harm3d(x) + laplacian_of_bubble(x),
    known_harmonic=False,
    harmonic_part=HARM3D,
    dim=3,
)

_NAMED = {t.name: t for t in (HARM2D, HARM3D, NONHARM3D)}


def get_target(spec):
    """Resolve ``harm2d``, ``harm3d``, ``nonharm3d`` or ``const:<value>``."""
    if spec in _NAMED:
        return _NAMED[spec]
    if spec.startswith("const:"):
        try:
            return constant(float(spec[len("const:"):]))
        except ValueError:
            pass
    raise ValueError("unknown target {!r}".format(spec))
