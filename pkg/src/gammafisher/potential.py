"""Polynomial potentials on an axis-aligned box.

Potentials are built from monomial terms ``c * x**e1 * y**e2`` so that the
gradient and Hessian are exact. Named families (double well, harmonic) are
thin constructors on top of the generic polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Potential:
    """Polynomial potential ``V(x) = sum_t c_t prod_i x_i**e_{t,i}``.

    Parameters
    ----------
    exponents : array of shape (n_terms, d)
        Nonnegative integer exponents of each monomial.
    coefficients : array of shape (n_terms,)
    box : array of shape (d, 2)
        Lower and upper bound per coordinate.
    name : str
    """

    exponents: np.ndarray
    coefficients: np.ndarray
    box: np.ndarray
    name: str = "polynomial"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        exps = np.atleast_2d(np.asarray(self.exponents, dtype=np.int64))
        coefs = np.asarray(self.coefficients, dtype=float).reshape(-1)
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if exps.shape[0] != coefs.shape[0]:
            raise ValueError("one coefficient per monomial required")
        if box.shape != (exps.shape[1], 2):
            raise ValueError(f"box must have shape ({exps.shape[1]}, 2), got {box.shape}")
        if exps.shape[1] not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if np.any(exps < 0):
            raise ValueError("exponents must be nonnegative")
        if np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("box must be nonempty along every axis")
        for arr in (exps, coefs, box):
            arr.setflags(write=False)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "box", box)

    @property
    def dimension(self) -> int:
        return self.exponents.shape[1]

    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dimension:
            raise ValueError(f"points must have trailing dimension {self.dimension}")
        return x

    @staticmethod
    def _powers(x, e):
        # x**e with the convention 0**0 = 1 and x**(-1) -> 0 (derivative of constants)
        out = np.where(e >= 0, x ** np.maximum(e, 0), 0.0)
        return out

    def value(self, x):
        """V at points of shape (..., d); returns shape (...)."""
        x = self._as_points(x)
        mono = np.prod(self._powers(x[..., None, :], self.exponents), axis=-1)
        return mono @ self.coefficients

    def gradient(self, x):
        """Gradient at points of shape (..., d); returns shape (..., d)."""
        x = self._as_points(x)
        d = self.dimension
        out = np.empty(x.shape, dtype=float)
        for k in range(d):
            e = self.exponents.copy()
            scale = self.coefficients * e[:, k]
            e[:, k] -= 1
            mono = np.prod(self._powers(x[..., None, :], e), axis=-1)
            out[..., k] = mono @ scale
        return out

    def hessian(self, x):
        """Hessian at points of shape (..., d); returns shape (..., d, d)."""
        x = self._as_points(x)
        d = self.dimension
        out = np.empty(x.shape + (d,), dtype=float)
        for k in range(d):
            for l in range(k, d):
                e = self.exponents.copy()
                scale = self.coefficients * e[:, k]
                e[:, k] -= 1
                scale = scale * e[:, l]
                e[:, l] -= 1
                mono = np.prod(self._powers(x[..., None, :], e), axis=-1)
                out[..., k, l] = out[..., l, k] = mono @ scale
        return out

    def laplacian(self, x):
        return np.trace(self.hessian(x), axis1=-2, axis2=-1)

    def shifted(self, constant: float) -> "Potential":
        """Same potential plus an additive constant."""
        exps = np.vstack([self.exponents, np.zeros((1, self.dimension), dtype=np.int64)])
        coefs = np.append(self.coefficients, constant)
        return Potential(exps, coefs, self.box, name=f"{self.name}+const", params=self.params)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "terms": [
                {"exponents": [int(v) for v in e], "coefficient": float(c)}
                for e, c in zip(self.exponents, self.coefficients)
            ],
            "box": self.box.tolist(),
        }


def polynomial(terms: Sequence, box, name: str = "polynomial") -> Potential:
    """Build a potential from ``[(exponents, coefficient), ...]``.

    In 1D an integer exponent is accepted in place of a 1-tuple.
    """
    exps, coefs = [], []
    for e, c in terms:
        exps.append(np.atleast_1d(e))
        coefs.append(c)
    return Potential(np.array(exps), np.array(coefs), box, name=name)


def double_well(tilt: float = 0.0, transverse: float | None = None, box=None,
                name: str | None = None) -> Potential:
    """``(x^2 - 1)^2 + tilt * x`` and, in 2D, ``+ transverse * y^2``."""
    if transverse is None:
        terms = [((4,), 1.0), ((2,), -2.0), ((0,), 1.0)]
        if tilt:
            terms.append(((1,), tilt))
        box = [[-3.0, 3.0]] if box is None else box
    else:
        terms = [((4, 0), 1.0), ((2, 0), -2.0), ((0, 0), 1.0), ((0, 2), transverse)]
        if tilt:
            terms.append(((1, 0), tilt))
        box = [[-2.5, 2.5], [-2.0, 2.0]] if box is None else box
    pot = polynomial(terms, box, name=name or ("tilted_double_well" if tilt else "double_well"))
    object.__setattr__(pot, "params", {"tilt": tilt, "transverse": transverse})
    return pot


def harmonic(stiffness: Sequence[float] | float = 1.0, box=None, name: str = "harmonic") -> Potential:
    """``sum_i stiffness_i * x_i^2 / 2``."""
    k = np.atleast_1d(np.asarray(stiffness, dtype=float))
    d = k.size
    terms = []
    for i in range(d):
        e = [0] * d
        e[i] = 2
        terms.append((tuple(e), 0.5 * k[i]))
    if box is None:
        box = [[-4.0, 4.0]] * d
    pot = polynomial(terms, box, name=name)
    object.__setattr__(pot, "params", {"stiffness": k.tolist()})
    return pot


FAMILIES = {
    "double_well": double_well,
    "harmonic": harmonic,
}


def from_config(block: dict) -> Potential:
    """Build a potential from a config block ``{"family", "params", "box"}``."""
    family = block["family"]
    params = dict(block.get("params", {}))
    box = block.get("box")
    if family == "polynomial":
        terms = [(t["exponents"], t["coefficient"]) for t in params["terms"]]
        return polynomial(terms, box, name=block.get("name", "polynomial"))
    try:
        ctor = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown potential family {family!r}") from None
    if box is not None:
        params["box"] = box
    if "name" in block:
        params["name"] = block["name"]
    return ctor(**params)
