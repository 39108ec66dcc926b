"""Exact scattering data for the semiclassical barrier potential.

The initial condition is a rectangular barrier of height ``A`` on
(-1/2, 1/2).  For this potential the Zakharov-Shabat transfer
coefficients are elementary functions of ``s = (A^2 + lambda^2)^(1/2)``,
and everything downstream (reflection coefficient, purely imaginary
eigenvalues, limiting eigenvalue density, norming-constant extrapolation)
has a closed form.

Branch conventions
------------------
Two square roots of ``A^2 + lambda^2`` appear in the theory and they are
*different* functions:

* ``root_cut_outside`` -- principal ``sqrt(A^2 + lambda^2)``, branch cut
  on the imaginary axis beyond ``±iA``.  Real and positive on the real
  axis, equal to ``sqrt(A^2 - eta^2)`` on the spike ``lambda = i eta``,
  ``0 < eta < A``.  This is the branch used by the transfer coefficients,
  the density and the norming-constant extrapolation.
* ``root_cut_spike`` -- ``lambda * sqrt(1 + A^2/lambda^2)`` with the
  principal root, branch cut on the spike ``[-iA, iA]`` itself, behaving
  like ``lambda`` at infinity.  This is the branch used by the
  log-potential machinery away from the spike.

All functions accept scalars or numpy arrays of complex values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BarrierParams",
    "EigenvalueSet",
    "admissible_h",
    "transfer_coefficients",
    "reflection_coefficient",
    "reflection_semiclassical",
    "eigenvalues",
    "density",
    "X_eval",
    "root_cut_outside",
    "root_cut_spike",
]


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierParams:
    """Barrier height and semiclassical parameter on the admissible lattice.

    ``h`` is restricted to the discrete set ``A/(k pi)`` so that the
    reflection coefficient vanishes at the origin and the transfer matrix
    has no real spectral singularity.
    """

    A: float
    h: float
    k_index: int

    def __post_init__(self) -> None:
        if self.A <= 0:
            raise ValueError(f"barrier height must be positive, got A={self.A}")
        if self.h <= 0:
            raise ValueError(f"semiclassical parameter must be positive, got h={self.h}")
        if self.k_index < 1:
            raise ValueError(f"lattice index must be a positive integer, got {self.k_index}")
        if abs(self.h * self.k_index * np.pi - self.A) > 1e-12:
            raise ValueError(
                "h is off the admissible lattice: "
                f"|h*k*pi - A| = {abs(self.h * self.k_index * np.pi - self.A):.3e}"
            )


def admissible_h(A: float, k: int) -> BarrierParams:
    """Barrier parameters with ``h`` on the admissible lattice, ``h = A/(k pi)``."""
    if A <= 0:
        raise ValueError(f"barrier height must be positive, got A={A}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"lattice index must be a positive integer, got {k}")
    return BarrierParams(A=float(A), h=float(A) / (k * np.pi), k_index=int(k))


# --------------------------------------------------------------------------
# branches of (A^2 + lambda^2)^(1/2)
# --------------------------------------------------------------------------

def root_cut_outside(A: float, lam):
    """Principal ``sqrt(A^2 + lambda^2)``; cut on ``i(-inf,-A] U i[A,inf)``.

    Positive on the real axis and equal to ``sqrt(A^2 - eta^2)`` on the
    spike ``lambda = i eta``, ``|eta| < A``.
    """
    lam = np.asarray(lam, dtype=complex)
    return np.sqrt(A * A + lam * lam)


def root_cut_spike(A: float, lam):
    """``lambda * sqrt(1 + A^2/lambda^2)``; cut on the spike ``[-iA, iA]``.

    Behaves like ``lambda + O(1/lambda)`` at infinity; this is the branch
    appearing in exterior log-potential formulas.  The origin sits on the
    cut; it is assigned the boundary value A from the right half-plane.
    """
    lam = np.asarray(lam, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lam * np.sqrt(1.0 + (A * A) / (lam * lam))
    return np.where(lam == 0, A + 0j, out)[()]


# entire building blocks: cos(sqrt(w)) and sin(sqrt(w))/sqrt(w).  Both are
# entire in w, which is what makes the transfer coefficients entire in
# lambda without any branch bookkeeping.

def _cos_sqrt(w):
    w = np.asarray(w, dtype=complex)
    return np.cos(np.sqrt(w))


def _sinc_sqrt(w):
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-8
    ws = w[small]
    # series for sin(sqrt w)/sqrt w; three terms are ample below 1e-8
    out[small] = 1.0 - ws / 6.0 + ws * ws / 120.0
    wl = w[~small]
    rt = np.sqrt(wl)
    out[~small] = np.sin(rt) / rt
    return out


# --------------------------------------------------------------------------
# transfer and reflection coefficients
# --------------------------------------------------------------------------

def transfer_coefficients(lam, p: BarrierParams):
    """Transfer coefficients ``(alpha, beta)`` of the barrier potential.

    ``alpha = e^{i lam/h} (cos(s/h) - i lam sin(s/h)/s)`` and
    ``beta = -A e^{i lam/h} sin(s/h)/s`` with ``s = (A^2+lam^2)^(1/2)``;
    written through entire functions of ``w = (A^2+lam^2)/h^2`` so the pair
    is entire in ``lam`` (the ``s -> 0`` limit ``sin(s/h)/s -> 1/h`` is
    automatic).

    On the real axis ``|alpha|^2 + |beta|^2 = 1``.
    """
    lam = np.asarray(lam, dtype=complex)
    A, h = p.A, p.h
    w = (A * A + lam * lam) / (h * h)
    phase = np.exp(1j * lam / h)
    sinc = _sinc_sqrt(w) / h          # sin(s/h)/s, entire
    alpha = phase * (_cos_sqrt(w) - 1j * lam * sinc)
    beta = -A * phase * sinc
    return alpha, beta


def reflection_coefficient(lam, p: BarrierParams):
    """Reflection coefficient ``r = beta/alpha`` in entire-safe form.

    Evaluates ``-A sin(s/h) / (s cos(s/h) - i lam sin(s/h))`` through the
    entire building blocks, so the only singularities are genuine poles at
    the eigenvalues ``i eta_k`` (where the denominator, which is
    ``e^{-i lam/h} alpha`` up to a factor, vanishes).  At such points the
    returned value is ``inf``.
    """
    lam = np.asarray(lam, dtype=complex)
    A, h = p.A, p.h
    w = (A * A + lam * lam) / (h * h)
    sinc = _sinc_sqrt(w) / h
    den = _cos_sqrt(w) - 1j * lam * sinc
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -A * sinc / den
    return r


def reflection_semiclassical(lam, p: BarrierParams):
    """Leading semiclassical form ``-iA/(s + lambda)`` of the reflection
    coefficient, valid where ``Im s > 0`` (there ``cot(s/h) -> -i``
    exponentially fast as ``h -> 0``).  On the spike itself the exact
    coefficient keeps oscillating in ``h`` and does not converge pointwise.
    """
    s = root_cut_outside(p.A, lam)
    return -1j * p.A / (s + np.asarray(lam, dtype=complex))


# --------------------------------------------------------------------------
# eigenvalues
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenvalueSet:
    """Purely imaginary eigenvalues ``i eta_k`` of the barrier data.

    ``etas`` are sorted ascending in (0, A); ``s_values[k]`` is the
    corresponding ``sqrt(A^2 - eta_k^2)`` (descending).  There are exactly
    ``k_index`` of them on the admissible lattice.
    """

    etas: np.ndarray
    s_values: np.ndarray
    params: BarrierParams = field(repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return 1j * self.etas


def _eig_equation(s: float, p: BarrierParams) -> float:
    """``s cos(s/h) + eta sin(s/h)`` with ``eta = sqrt(A^2-s^2)``.

    Vanishing of this expression is exactly ``alpha(i eta) = 0``: at
    ``lambda = i eta`` the transfer coefficient reduces to
    ``e^{-eta/h}(cos(s/h) + (eta/s) sin(s/h))``.  Equivalently
    ``tan(s/h) = -s/eta``, one root per branch of the tangent.
    """
    eta = np.sqrt(max(p.A * p.A - s * s, 0.0))
    return s * np.cos(s / p.h) + eta * np.sin(s / p.h)


def eigenvalues(p: BarrierParams) -> EigenvalueSet:
    """All purely imaginary eigenvalues, one per tangent branch.

    The roots of ``tan(s/h) = -s/eta`` in ``s = sqrt(A^2 - eta^2)`` are
    bracketed by consecutive half-branches ``((k-1/2) h pi, k h pi)`` for
    ``k = 1..k_index`` (on the admissible lattice the last right endpoint
    is exactly ``A``), then polished by Brent's method.  A coarse
    sign-change scan cross-checks that no root was missed.
    """
    from scipy.optimize import brentq

    A, h = p.A, p.h
    ss = []
    for k in range(1, p.k_index + 1):
        lo = (k - 0.5) * h * np.pi
        hi = min(k * h * np.pi, A)
        flo, fhi = _eig_equation(lo, p), _eig_equation(hi, p)
        if flo * fhi > 0:  # pragma: no cover - cannot happen on the lattice
            raise RuntimeError(f"eigenvalue bracket {k} lost its sign change")
        ss.append(brentq(_eig_equation, lo, hi, args=(p,), xtol=1e-15, rtol=8.9e-16))
    ss = np.array(ss)

    nscan = 40 * p.k_index
    grid = np.linspace(1e-9, A - 1e-12, nscan)
    vals = np.array([_eig_equation(s, p) for s in grid])
    ncross = int(np.sum(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0))
    if ncross != p.k_index:
        raise RuntimeError(
            f"eigenvalue count mismatch: brackets gave {p.k_index}, scan sees {ncross}"
        )

    etas = np.sqrt(np.maximum(A * A - ss * ss, 0.0))
    order = np.argsort(etas)
    return EigenvalueSet(etas=etas[order], s_values=ss[order], params=p)


# --------------------------------------------------------------------------
# limiting density and norming-constant extrapolation
# --------------------------------------------------------------------------

def density(lam, p: BarrierParams):
    """Limiting eigenvalue density ``rho0 = lambda / (pi (A^2+lambda^2)^(1/2))``.

    Branch: ``root_cut_outside``, so that on the spike
    ``rho0(i eta) = i eta / (pi sqrt(A^2 - eta^2))`` (purely imaginary with
    positive imaginary part for ``0 < eta < A``), with the integrable
    ``1/sqrt`` blow-up at ``iA``.
    """
    lam = np.asarray(lam, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return lam / (np.pi * root_cut_outside(p.A, lam))


def X_eval(lam, p: BarrierParams):
    """Norming-constant extrapolation ``X = -(A^2+lambda^2)^(1/2)``.

    Same branch as :func:`density`, hence ``X * rho0 = -lambda/pi``
    identically; on the spike ``X(i eta) = -sqrt(A^2-eta^2)`` which is
    ``-h k pi`` up to O(h^2) at the k-th eigenvalue.
    """
    return -root_cut_outside(p.A, lam)
