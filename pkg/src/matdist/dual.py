"""
Forward-mode dual numbers with a gradient vector.

A Dual carries a real value and the gradient of that value with respect to a
fixed set of seeded inputs. Constitutive laws written with ordinary
arithmetic and the helpers below (trace, det3, frobenius_sq, expm) run
unchanged on floats, float arrays and object arrays of Duals.
"""

import numbers
from typing import Any, List, Sequence

import numpy as np
import scipy.linalg


class Dual:
    """Real value plus gradient with respect to the seeded inputs."""

    __slots__ = ("real", "grad")

    def __init__(self, real: float, grad: Any):
        self.real = float(real)
        self.grad = np.asarray(grad, dtype=float)

    def __repr__(self) -> str:
        return f"Dual({self.real!r}, {self.grad!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.grad + other.grad)
        if isinstance(other, numbers.Real):
            return Dual(self.real + other, self.grad)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real - other.real, self.grad - other.grad)
        if isinstance(other, numbers.Real):
            return Dual(self.real - other, self.grad)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return Dual(other - self.real, -self.grad)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real * other.real,
                        self.real * other.grad + other.real * self.grad)
        if isinstance(other, numbers.Real):
            return Dual(self.real * other, self.grad * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real / other.real,
                        (self.grad * other.real - self.real * other.grad) / other.real ** 2)
        if isinstance(other, numbers.Real):
            return Dual(self.real / other, self.grad / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return Dual(other / self.real, -other * self.grad / self.real ** 2)
        return NotImplemented

    def __neg__(self):
        return Dual(-self.real, -self.grad)

    def __pos__(self):
        return self

    def __pow__(self, power, modulo=None):
        if isinstance(power, Dual):
            return (power * self.log()).exp()
        if power == 0:
            return Dual(1.0, np.zeros_like(self.grad))
        return Dual(self.real ** power, power * self.real ** (power - 1) * self.grad)

    def __rpow__(self, base):
        return (self * np.log(base)).exp()

    def __abs__(self):
        return Dual(abs(self.real), np.sign(self.real) * self.grad)

    def __lt__(self, other):
        return self.real < real_part(other)

    def __le__(self, other):
        return self.real <= real_part(other)

    def __gt__(self, other):
        return self.real > real_part(other)

    def __ge__(self, other):
        return self.real >= real_part(other)

    # numpy dispatches ufuncs on object arrays to these methods
    def exp(self):
        value = np.exp(self.real)
        return Dual(value, value * self.grad)

    def log(self):
        return Dual(np.log(self.real), self.grad / self.real)

    def sqrt(self):
        value = np.sqrt(self.real)
        return Dual(value, 0.5 * self.grad / value)

    def sin(self):
        return Dual(np.sin(self.real), np.cos(self.real) * self.grad)

    def cos(self):
        return Dual(np.cos(self.real), -np.sin(self.real) * self.grad)


def seed(values: Sequence[float]) -> List[Dual]:
    """Return one Dual per value, each seeded with its own unit direction."""
    n = len(values)
    eye = np.eye(n)
    return [Dual(v, eye[k]) for k, v in enumerate(values)]


def real_part(value: Any) -> float:
    if isinstance(value, Dual):
        return value.real
    return float(value)


def grad_part(value: Any, n: int) -> np.ndarray:
    if isinstance(value, Dual):
        return value.grad
    return np.zeros(n)


def object_array(values: Sequence[Any], shape: tuple) -> np.ndarray:
    """Pack Duals into an object array of the given shape."""
    out = np.empty(len(values), dtype=object)
    for k, v in enumerate(values):
        out[k] = v
    return out.reshape(shape)


def trace(A):
    return A[0, 0] + A[1, 1] + A[2, 2]


def frobenius_sq(F):
    """tr(FᵀF)."""
    return np.sum(F * F)


def det3(F):
    return (F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
            - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
            + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]))


def expm(M):
    """Matrix exponential of a float matrix or an object matrix of Duals.

    Gradients propagate through the Fréchet derivative of expm, one seeded
    direction at a time.
    """
    M = np.asarray(M)
    if M.dtype != object:
        return scipy.linalg.expm(M.astype(float))

    real = np.vectorize(real_part, otypes=[float])(M)
    n = next((v.grad.size for v in M.flat if isinstance(v, Dual)), 0)
    value = scipy.linalg.expm(real)
    if n == 0:
        return value

    grads = np.stack([grad_part(v, n) for v in M.flat]).reshape(M.shape + (n,))
    deriv = np.zeros(M.shape + (n,))
    for k in range(n):
        direction = grads[..., k]
        if np.any(direction):
            deriv[..., k] = scipy.linalg.expm_frechet(real, direction, compute_expm=False)

    out = np.empty(M.shape, dtype=object)
    for idx in np.ndindex(M.shape):
        out[idx] = Dual(value[idx], deriv[idx])
    return out
