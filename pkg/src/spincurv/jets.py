"""Second-order forward-mode jets (value, gradient, Hessian) over numpy arrays."""

from __future__ import annotations

import numpy as np


class Jet:
    """Truncated Taylor expansion of a scalar field to second order.

    ``val`` has shape P, ``grad`` shape P + (n,), ``hess`` shape P + (n, n).
    Arithmetic follows the chain rule exactly, so derivatives of closed-form
    expressions are exact up to rounding.
    """

    __array_priority__ = 100

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, x: np.ndarray) -> list["Jet"]:
        """Independent coordinate jets for points ``x`` of shape P + (n,)."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        out = []
        for i in range(n):
            grad = np.zeros(x.shape)
            grad[..., i] = 1.0
            out.append(cls(x[..., i].copy(), grad, np.zeros(x.shape + (n,))))
        return out

    @classmethod
    def constant(cls, c, like: "Jet") -> "Jet":
        val = np.broadcast_to(np.asarray(c, dtype=float), like.val.shape).copy()
        return cls(val, np.zeros_like(like.grad), np.zeros_like(like.hess))

    def chain(self, f0, f1, f2) -> "Jet":
        """Compose a scalar function with value f0 and derivatives f1, f2."""
        g = self.grad
        outer = g[..., :, None] * g[..., None, :]
        return Jet(
            f0,
            f1[..., None] * g,
            f2[..., None, None] * outer + f1[..., None, None] * self.hess,
        )

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)
        return Jet(self.val + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self, other
            cross = a.grad[..., :, None] * b.grad[..., None, :]
            return Jet(
                a.val * b.val,
                a.grad * b.val[..., None] + a.val[..., None] * b.grad,
                a.hess * b.val[..., None, None]
                + a.val[..., None, None] * b.hess
                + cross
                + np.swapaxes(cross, -1, -2),
            )
        other = np.asarray(other, dtype=float)
        return Jet(self.val * other, self.grad * other[..., None], self.hess * other[..., None, None])

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1.0 / self.val
        return self.chain(r, -(r**2), 2.0 * r**3)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p: float):
        v = self.val
        return self.chain(v**p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))

    def sqrt(self):
        return self ** 0.5

    def exp(self):
        e = np.exp(self.val)
        return self.chain(e, e, e)

    def laplacian(self) -> np.ndarray:
        """Flat Laplacian (trace of the Hessian)."""
        return np.trace(self.hess, axis1=-2, axis2=-1)


def where(mask, a: Jet, b: Jet) -> Jet:
    """Elementwise select between two jets."""
    m = np.asarray(mask, dtype=bool)
    return Jet(
        np.where(m, a.val, b.val),
        np.where(m[..., None], a.grad, b.grad),
        np.where(m[..., None, None], a.hess, b.hess),
    )


def polyval(coeffs, x: Jet) -> Jet:
    """Horner evaluation of ``sum_k coeffs[k] x**k`` on a jet."""
    coeffs = list(coeffs)
    out = Jet.constant(coeffs[-1], x)
    for c in reversed(coeffs[:-1]):
        out = out * x + c
    return out
