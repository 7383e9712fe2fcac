"""
Constitutive laws W(t, x, F) on the body-time manifold and their first
derivatives.

Laws are plain functions of (t, x, F) written with ordinary arithmetic and
the scalar-generic helpers from dual.py, so the same code runs on floats
(evaluation) and on Duals (exact first derivatives). V is represented as
R^m; for stress-valued laws use m = 6 with Voigt packing
(11, 22, 33, 23, 13, 12) and keep the packing symmetric yourself.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dual import det3, expm, frobenius_sq, grad_part, object_array, real_part, seed
from .errors import ConfigError, DomainError, LawNotFoundError, NonFiniteError

logger = logging.getLogger(__name__)

# det F must stay above this to remain in GL+(3)
DET_EPS = 1e-6

# jet coordinates: t, x^1..x^3, F_11..F_33 (row-major)
JET_SIZE = 13

_FD_SCALE = np.cbrt(np.finfo(float).eps)


@dataclass(frozen=True)
class DomainBox:
    """Closed box of admissible (t, x)."""

    t_min: float = 0.0
    t_max: float = 10.0
    x_min: Tuple[float, float, float] = (-2.0, -2.0, -2.0)
    x_max: Tuple[float, float, float] = (2.0, 2.0, 2.0)

    def contains(self, t: float, x: Sequence[float]) -> bool:
        if not (self.t_min <= t <= self.t_max):
            return False
        return all(lo <= xi <= hi for xi, lo, hi in zip(x, self.x_min, self.x_max))


@dataclass(frozen=True)
class ConstitutiveLaw:
    """Mechanical response W(t, x, F) -> R^m.

    `eval` must be deterministic, must not depend on anything but its
    arguments, and must accept Duals wherever it accepts floats.
    """

    name: str
    output_dim: int
    eval: Callable[[Any, Any, Any], Sequence[Any]]
    domain_box: DomainBox = field(default_factory=DomainBox)
    params: Mapping[str, Any] = field(default_factory=dict)
    description: str = ""

    def evaluate(self, t: float, x: Sequence[float], F: np.ndarray) -> np.ndarray:
        """Float evaluation with domain and finiteness checks."""
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        check_point(self, t, x, F)
        value = _float_values(self, t, x, F)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"{self.name} returned non-finite values at t={t}, x={x.tolist()}")
        return value


@dataclass(frozen=True)
class LawJet:
    """Value and first partials of W at one (t, x, F).

    d_F column 3*i + j holds dW/dF_ij.
    """

    value: np.ndarray
    d_t: np.ndarray
    d_x: np.ndarray
    d_F: np.ndarray
    mode: str


def check_point(law: ConstitutiveLaw, t: float, x: np.ndarray, F: np.ndarray) -> None:
    if not law.domain_box.contains(t, x):
        raise DomainError(f"({t}, {list(map(float, x))}) is outside the domain of {law.name}")
    det = np.linalg.det(F)
    if not det > DET_EPS:
        raise DomainError(f"det F = {det:.3e} is not above {DET_EPS} for {law.name}")


def _components(law: ConstitutiveLaw, out: Sequence[Any]) -> List[Any]:
    components = list(out)
    if len(components) != law.output_dim:
        raise ValueError(f"{law.name} returned {len(components)} components, expected {law.output_dim}")
    return components


def _float_values(law: ConstitutiveLaw, t: float, x: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.array([real_part(c) for c in _components(law, law.eval(t, x, F))])


def _dual_jet(law: ConstitutiveLaw, t: float, x: np.ndarray, F: np.ndarray) -> LawJet:
    inputs = seed([float(t), *x, *F.ravel()])
    out = law.eval(inputs[0], object_array(inputs[1:4], (3,)), object_array(inputs[4:], (3, 3)))
    components = _components(law, out)
    value = np.array([real_part(c) for c in components])
    grads = np.stack([grad_part(c, JET_SIZE) for c in components])
    return LawJet(value=value, d_t=grads[:, 0], d_x=grads[:, 1:4], d_F=grads[:, 4:], mode="dual")


def _fd_jet(law: ConstitutiveLaw, t: float, x: np.ndarray, F: np.ndarray) -> LawJet:
    u0 = np.concatenate([[float(t)], x, F.ravel()])

    def values(u):
        return _float_values(law, u[0], u[1:4], u[4:].reshape(3, 3))

    grads = np.empty((law.output_dim, JET_SIZE))
    for k in range(JET_SIZE):
        h = max(1.0, abs(u0[k])) * _FD_SCALE
        up, down = u0.copy(), u0.copy()
        up[k] += h
        down[k] -= h
        grads[:, k] = (values(up) - values(down)) / (up[k] - down[k])
    return LawJet(value=values(u0), d_t=grads[:, 0], d_x=grads[:, 1:4], d_F=grads[:, 4:], mode="fd")


def jet(law: ConstitutiveLaw, t: float, x: Sequence[float], F: np.ndarray, mode: str = "auto") -> LawJet:
    """Value and first partials of W in t, x and F.

    mode "auto" uses dual numbers and falls back to central differences when
    the law cannot run on Duals; "dual" and "fd" force one method.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    check_point(law, t, x, F)

    if mode == "fd":
        result = _fd_jet(law, t, x, F)
    elif mode in ("auto", "dual"):
        try:
            result = _dual_jet(law, t, x, F)
        except TypeError:
            if mode == "dual":
                raise
            logger.debug("%s does not propagate duals, using finite differences", law.name)
            result = _fd_jet(law, t, x, F)
    else:
        raise ValueError(f"unknown jet mode {mode!r}")

    for block in (result.value, result.d_t, result.d_x, result.d_F):
        if not np.all(np.isfinite(block)):
            raise NonFiniteError(f"{law.name} produced non-finite jet at t={t}, x={x.tolist()}")
    return result


def response_gradient(law: ConstitutiveLaw, t: float, x: Sequence[float], F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """W and dW/dF only (m and m×9), with t and x held as plain floats."""
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    check_point(law, t, x, F)
    try:
        inputs = seed(list(F.ravel()))
        components = _components(law, law.eval(float(t), x, object_array(inputs, (3, 3))))
        value = np.array([real_part(c) for c in components])
        d_F = np.stack([grad_part(c, 9) for c in components])
    except TypeError:
        full = _fd_jet(law, t, x, F)
        value, d_F = full.value, full.d_F
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(d_F))):
        raise NonFiniteError(f"{law.name} produced non-finite gradient at t={t}, x={x.tolist()}")
    return value, d_F


# --- built-in laws -------------------------------------------------------

DEFAULT_IMPLANT_D = ((0.5, 1.0, 0.0), (0.0, -0.5, 0.2), (0.0, 0.0, 0.0))


def _homog_isotropic(params):
    def homog_isotropic(t, x, F):
        return [frobenius_sq(F)]
    return homog_isotropic, 1, "W = tr(FᵀF)"


def _homog_pair(params):
    def homog_pair(t, x, F):
        return [frobenius_sq(F), det3(F)]
    return homog_pair, 2, "W = (tr(FᵀF), det F)"


def _aging_pair(params):
    def aging_pair(t, x, F):
        return [(1 + t) * frobenius_sq(F), det3(F)]
    return aging_pair, 2, "W = ((1+t)·tr(FᵀF), det F)"


def _graded(params):
    c = float(params.get("c", 1.0))

    def graded(t, x, F):
        f = 1 + c * x[0] * x[0]
        return [f * frobenius_sq(F), det3(F)]
    return graded, 2, "W = ((1 + c·(x¹)²)·tr(FᵀF), det F)"


def _graded_scalar(params):
    c = float(params.get("c", 1.0))

    def graded_scalar(t, x, F):
        return [(1 + c * x[0] * x[0]) * frobenius_sq(F)]
    return graded_scalar, 1, "W = (1 + c·(x¹)²)·tr(FᵀF), uniform through dilations"


def _graded_radial(params):
    c = float(params.get("c", 1.0))

    def graded_radial(t, x, F):
        f = 1 + c * (x[0] * x[0] + x[1] * x[1])
        return [f * frobenius_sq(F), det3(F)]
    return graded_radial, 2, "W = ((1 + c·((x¹)² + (x²)²))·tr(FᵀF), det F)"


def implant_generators(params: Optional[Mapping[str, Any]] = None) -> List[np.ndarray]:
    """Generators A_i of K(x) = expm(x¹A₁ + x²A₂ + x³A₃)."""
    params = params or {}
    if "generators" in params:
        generators = [np.asarray(g, dtype=float) for g in params["generators"]]
        if len(generators) != 3 or any(g.shape != (3, 3) for g in generators):
            raise ConfigError("implant generators must be three 3×3 matrices")
        return generators
    D = np.asarray(params.get("D", DEFAULT_IMPLANT_D), dtype=float)
    if D.shape != (3, 3):
        raise ConfigError("implant D must be a 3×3 matrix")
    rate = float(params.get("rate", 0.3))
    return [rate * D, np.zeros((3, 3)), np.zeros((3, 3))]


def implant_transform(x: Sequence[Any], params: Optional[Mapping[str, Any]] = None):
    """K(x) for the implant law."""
    A = implant_generators(params)
    return expm(x[0] * A[0] + x[1] * A[1] + x[2] * A[2])


def _implant(params):
    A = implant_generators(params)

    def implant(t, x, F):
        G = F @ expm(x[0] * A[0] + x[1] * A[1] + x[2] * A[2])
        return [frobenius_sq(G), det3(G)]
    return implant, 2, "W = Ŵ(F·K(x)), Ŵ = (tr(FᵀF), det F), K(x) = expm(Σ xⁱAᵢ)"


def _deformation_gradient(params):
    def deformation_gradient(t, x, F):
        return list(F.ravel())
    return deformation_gradient, 9, "W = F (row-major)"


class LawRegistry(dict):
    """Name → law map whose failed lookups raise LawNotFoundError."""

    def __missing__(self, key):
        raise LawNotFoundError(f"unknown law {key!r}; available: {', '.join(sorted(self))}")


class LawFactory:
    """Factory for creating constitutive laws by registry name."""

    _BUILDERS: Dict[str, Callable] = {
        "homog_isotropic": _homog_isotropic,
        "homog_pair": _homog_pair,
        "aging_pair": _aging_pair,
        "graded": _graded,
        "graded_scalar": _graded_scalar,
        "graded_radial": _graded_radial,
        "implant": _implant,
        "deformation_gradient": _deformation_gradient,
    }

    @staticmethod
    def available_laws() -> List[str]:
        return sorted(LawFactory._BUILDERS)

    @staticmethod
    def create_law(name: str, params: Optional[Mapping[str, Any]] = None) -> ConstitutiveLaw:
        """Create a law instance.

        Args:
            name: Registry name, e.g. "aging_pair"
            params: Law parameters; the optional "domain" entry overrides the
                domain box with keys t_min, t_max, x_min, x_max

        Returns:
            ConstitutiveLaw
        """
        builder = LawFactory._BUILDERS.get(name)
        if builder is None:
            raise LawNotFoundError(f"unknown law {name!r}; available: {', '.join(LawFactory.available_laws())}")
        params = dict(params or {})
        domain = params.pop("domain", None)
        func, output_dim, description = builder(params)
        box = DomainBox()
        if domain:
            try:
                box = DomainBox(
                    t_min=float(domain.get("t_min", box.t_min)),
                    t_max=float(domain.get("t_max", box.t_max)),
                    x_min=tuple(float(v) for v in domain.get("x_min", box.x_min)),
                    x_max=tuple(float(v) for v in domain.get("x_max", box.x_max)),
                )
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid domain for {name}: {e}") from e
        return ConstitutiveLaw(name=name, output_dim=output_dim, eval=func,
                               domain_box=box, params=params, description=description)


def builtin_registry() -> LawRegistry:
    """All built-in laws with default parameters."""
    return LawRegistry({name: LawFactory.create_law(name) for name in LawFactory.available_laws()})
