"""Hyperelliptic-surface machinery over the band endpoints.

The modulation stage needs period integrals on the two-sheeted surface
whose branch points are the band endpoints and their mirror images:
normalized holomorphic differentials, the period matrix, theta sums, the
Abel map, Riemann constants, the second-kind differential matched to the
phase polynomial at the two infinities, and the wave-number vectors built
from them.

Cuts are realized as straight chords between paired branch points:
the central chord joins the top of the through-zero band to its mirror
image, and each higher band contributes a chord plus its mirror.  The
two-sheeted square root is assembled from per-chord factors

    s_c(lam) = r_c * i * sign(Im zeta) * sqrt(1 - zeta^2),
    zeta = (lam - m_c) / r_c,

each analytic off its own chord, so the product has its branch cuts
exactly on the chords and R(lam) ~ -lam^(G+1) at infinity.

Homology cycles: a_k is a loop around the k-th non-central cut on the
first sheet; b_k passes through the central cut and the k-th cut.  Both
kinds collapse to line integrals: a loop around a cut equals twice the
plus-side integral along it (Gauss-Chebyshev after the cosine
substitution), and a through-cycle equals twice the first-sheet path
from the top of the central cut to a branch point of the other cut (the
sheet-two return leg along the mirrored path contributes the same
amount, and the loop closes only at branch points, where the sheets
meet).  The square-root vanishing of R at both ends is absorbed by
quadratic substitutions.  Canonicity of the realization is certified a
posteriori by the symmetry and negative-definiteness of the period
matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "SurfaceCut",
    "SurfaceModuli",
    "HolomorphicBasis",
    "PeriodMatrix",
    "WaveVectors",
    "R_eval",
    "band_collapse_integral",
    "through_path_integral",
    "holomorphic_basis",
    "period_matrix",
    "theta_eval",
    "theta_tail_radius",
    "abel_map",
    "abel_infinity",
    "lattice_reduce",
    "riemann_constants",
    "omega_and_U",
    "wave_vectors",
    "surface_to_dict",
    "surface_from_dict",
]

_GL32 = leggauss(32)
_GL12 = leggauss(12)


# --------------------------------------------------------------------------
# moduli and the two-sheeted square root
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceCut:
    """Straight branch chord from p to q."""

    p: complex
    q: complex

    @property
    def m(self):
        return 0.5 * (self.p + self.q)

    @property
    def r(self):
        return 0.5 * (self.q - self.p)

    def point(self, u: float) -> complex:
        """Interior point at chord coordinate u in (-1, 1)."""
        return self.m + u * self.r


@dataclass(frozen=True)
class SurfaceModuli:
    """Branch points in the open upper half-plane, mirror-completed.

    upper[0] is the top of the through-zero band; the remaining entries
    are the higher band endpoints in increasing height, paired
    consecutively into cuts.  With an odd count of remaining points the
    last one pairs with its own mirror image into a chord crossing the
    real axis (generic machinery; the barrier pipeline always produces
    an even genus)."""

    upper: tuple
    strict: bool = True

    def __post_init__(self):
        lam = np.asarray(self.upper, dtype=complex)
        if lam.ndim != 1 or len(lam) < 1:
            raise ValueError("need at least one branch point")
        if np.any(np.imag(lam) <= 0):
            raise ValueError("branch points must lie in the open upper half-plane")
        d = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(d, np.inf)
        if np.min(d) < 1e-12:
            raise ValueError("branch points must be pairwise distinct")
        if self.strict and self.genus % 2 != 0:
            raise ValueError(
                "odd genus is inconsistent with mirror-symmetric barrier data; "
                "pass strict=False for generic fixtures"
            )
        object.__setattr__(self, "upper", tuple(complex(z) for z in lam))

    @property
    def genus(self) -> int:
        return len(self.upper) - 1

    @property
    def points(self) -> np.ndarray:
        """All 2(G+1) branch points (upper then mirrored)."""
        up = np.asarray(self.upper, dtype=complex)
        return np.concatenate([up, np.conj(up)])

    @property
    def cuts(self) -> list:
        """Chords: index 0 central, then per band the upper chord followed
        by its mirror; an unpaired last point yields a self-mirror chord."""
        up = list(self.upper)
        out = [SurfaceCut(np.conj(up[0]), up[0])]
        rest = up[1:]
        k = 0
        while k + 1 < len(rest):
            a, b = rest[k], rest[k + 1]
            out.append(SurfaceCut(a, b))
            out.append(SurfaceCut(np.conj(a), np.conj(b)))
            k += 2
        if k < len(rest):
            out.append(SurfaceCut(np.conj(rest[k]), rest[k]))
        return out

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.points)))


def _sigma(zeta, side=1.0):
    """zeta * sqrt(1 - 1/zeta^2) with branch cut exactly on [-1, 1].

    Equals i*sign(Im zeta)*sqrt(1 - zeta^2) off the real axis; on the
    chord itself the side argument (+1: side toward which i*r points)
    selects the boundary value i*side*sqrt(1-u^2).  On the axis beyond
    the endpoints (real zeta, |zeta| > 1) the two sides agree and the
    continuous value sign(zeta)*sqrt(zeta^2-1) is returned; the principal
    square root of the negative real 1-zeta^2 lands on the upper side,
    so the sign factor there is -sign(Re zeta)."""
    zeta = np.asarray(zeta, dtype=complex)
    im = np.imag(zeta)
    re = np.real(zeta)
    out = 1j * np.sign(im) * np.sqrt(1.0 - zeta * zeta)
    tiny = im * im <= 1e-24 * (1.0 + re * re)
    if np.any(tiny):
        exact = np.where(
            np.abs(re) <= 1.0,
            1j * side * np.sqrt(np.maximum(1.0 - re * re, 0.0)),
            np.sign(re) * np.sqrt(np.maximum(re * re - 1.0, 0.0)) + 0j,
        )
        out = np.where(tiny, exact, out)
    return out


def R_eval(S: SurfaceModuli, lam, sheet: int = 1, side=1.0):
    """Two-sheeted root of prod (lam-lam_k)(lam-lam_k*), cut on the band
    chords, with R/lam^(G+1) -> -1 on the first sheet.  side picks the
    boundary value for points lying exactly on a chord."""
    lam = np.asarray(lam, dtype=complex)
    out = -np.ones_like(lam)
    for c in S.cuts:
        out = out * c.r * _sigma((lam - c.m) / c.r, side)
    return out if sheet == 1 else -out


def _poly_eval(coeffs, lam):
    """Evaluate sum_j coeffs[j] lam^j (coeffs low-to-high)."""
    out = np.zeros_like(np.asarray(lam, dtype=complex))
    for cj in reversed(coeffs):
        out = out * lam + cj
    return out


# --------------------------------------------------------------------------
# collapsed cycle integrals
# --------------------------------------------------------------------------

def band_collapse_integral(S: SurfaceModuli, cut_index: int, coeffs, n: int = 96):
    """Loop integral of (poly/R) dlam counterclockwise around one chord,
    collapsed to the chord: -2i * int_{-1}^{1} poly/(prod of the other
    factors) du/sqrt(1-u^2), by Gauss-Chebyshev (the cosine substitution
    absorbs the endpoint square roots, so convergence is spectral)."""
    cut = S.cuts[cut_index]
    k = np.arange(1, n + 1)
    u = np.cos((2 * k - 1) * np.pi / (2 * n))
    lam = cut.m + u * cut.r
    other = np.ones_like(lam)
    for j, c in enumerate(S.cuts):
        if j == cut_index:
            continue
        other = other * c.r * _sigma((lam - c.m) / c.r)
    vals = _poly_eval(coeffs, lam) / other
    return -2j * (np.pi / n) * np.sum(vals)


def _segment_clearance(a, b, cut: SurfaceCut) -> float:
    """Distance between segment [a,b] and the chord of cut."""

    def seg_pts(p, q, m=24):
        ts = np.linspace(0.0, 1.0, m)
        return p + ts * (q - p)

    def pt_seg(z, p, q):
        d = q - p
        tt = np.clip(np.real((z - p) * np.conj(d)) / max(abs(d) ** 2, 1e-300), 0, 1)
        return np.abs(z - (p + tt * d))

    za = seg_pts(a, b)
    zc = seg_pts(cut.p, cut.q)
    d1 = min(pt_seg(z, cut.p, cut.q) for z in za)
    d2 = min(pt_seg(z, a, b) for z in zc)
    return min(d1, d2)


def _route(S: SurfaceModuli, z0, z1, skip=()):
    """Polyline from z0 to z1 avoiding all chords not in skip.

    Straight when clear; otherwise one detour waypoint is pushed
    perpendicular to the worst offending chord, trying both sides and
    growing the offset until the whole polyline clears."""
    margin = 0.02 * S.scale
    cuts = [c for j, c in enumerate(S.cuts) if j not in skip]

    def clear(path):
        for a, b in zip(path[:-1], path[1:]):
            for c in cuts:
                if _segment_clearance(a, b, c) < margin:
                    return False
        return True

    path = [z0, z1]
    if clear(path):
        return path
    worst = min(cuts, key=lambda c: _segment_clearance(z0, z1, c))
    normal = 1j * (worst.q - worst.p) / abs(worst.q - worst.p)
    base = 0.5 * (z0 + z1)
    for k in range(1, 9):
        off = k * 0.35 * abs(worst.r) + k * margin
        for sgn in (+1.0, -1.0):
            w = base + sgn * off * normal
            cand = [z0, w, z1]
            if clear(cand):
                return cand
    raise RuntimeError("could not route a path between cuts")


def _branch_point_clearance(S: SurfaceModuli, a, b) -> float:
    """Distance from segment [a, b] to the nearest branch point (cut
    interiors do not limit quadrature accuracy: the integrand continues
    analytically through a chord onto the other sheet)."""
    d = b - a
    dd = max(abs(d) ** 2, 1e-300)
    out = np.inf
    for z in S.points:
        tt = np.clip(np.real((z - a) * np.conj(d)) / dd, 0.0, 1.0)
        out = min(out, abs(z - (a + tt * d)))
    return out


def path_line_integral(S: SurfaceModuli, path, coeffs, gl=_GL32):
    """int (poly/R) dlam along a polyline on the first sheet.

    Legs are bisected until each panel is shorter than its distance to
    the nearest branch point, so the Gauss rule keeps a wide analyticity
    ellipse even when the route passes close to a cut end."""
    xg, wg = gl
    total = 0.0 + 0.0j
    stack = list(zip(path[:-1], path[1:]))
    while stack:
        a, b = stack.pop()
        L = abs(b - a)
        if L < 1e-14:
            continue
        if L > _branch_point_clearance(S, a, b) and L > 1e-3 * S.scale:
            mid_p = 0.5 * (a + b)
            stack.append((a, mid_p))
            stack.append((mid_p, b))
            continue
        mid, half = 0.5 * (b + a), 0.5 * (b - a)
        lam = mid + half * xg
        total += half * np.sum(wg * _poly_eval(coeffs, lam) / R_eval(S, lam))
    return total


def _base_to_point_integral(S: SurfaceModuli, coeffs, lam):
    """int (poly/R) dlam on the first sheet from the base branch point
    (top of the central cut) to lam.

    The square-root vanishing of R at the base -- and at the target when
    it is itself a branch point -- is absorbed by quadratic-substitution
    legs; the middle is a routed polyline clear of every chord."""
    base = S.upper[0]
    lam = complex(lam)
    if abs(lam - base) < 1e-12:
        return 0.0 + 0.0j
    e0, d0 = _branch_exit(S, base)
    start = base + e0 * d0
    et, dt = _branch_exit(S, lam)
    target = lam if et is None else lam + et * dt
    val = _sqrt_leg(S, coeffs, base, e0, d0)
    if abs(target - start) > 1e-13:
        path = _route(S, start, target)
        val += path_line_integral(S, path, coeffs)
    if et is not None:
        val += _sqrt_leg(S, coeffs, lam, et, dt, reverse=True)
    return val


def _through_target(S: SurfaceModuli, j_cut: int):
    """Branch endpoint of cut j_cut that the through-cycle connects to:
    the one nearer the base (entering at the other endpoint shifts the
    cycle by the cut's own loop, which preserves canonicity)."""
    base = S.upper[0]
    c = S.cuts[j_cut]
    return c.p if abs(c.p - base) <= abs(c.q - base) else c.q


def through_path_integral(S: SurfaceModuli, j_cut: int, coeffs):
    """Period over the cycle through the central cut and cut j_cut: twice
    the first-sheet integral from the top of the central cut to a branch
    point of cut j_cut.

    The mirrored second-sheet return leg contributes the same amount
    because R flips sign; the composite is a genuine closed loop only
    when both ends are branch points, where the two sheets meet."""
    return 2.0 * _base_to_point_integral(S, coeffs, _through_target(S, j_cut))


# --------------------------------------------------------------------------
# normalized differentials and the period matrix
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HolomorphicBasis:
    """Coefficient matrix of the normalized holomorphic differentials.

    coeffs[k] holds the polynomial coefficients (low-to-high, length G)
    of the k-th differential's numerator; loop integrals of the k-th
    differential around the j-th non-central cut equal 2*pi*i*delta_jk."""

    coeffs: np.ndarray
    a_period_residual: float
    condition: float


def _monomial_a_periods(S: SurfaceModuli, n: int = 96) -> np.ndarray:
    G = S.genus
    M = np.zeros((G, G), dtype=complex)
    for j in range(G):
        for m in range(G):
            e = np.zeros(G)
            e[m] = 1.0
            M[j, m] = band_collapse_integral(S, j + 1, e, n=n)
    return M


def holomorphic_basis(S: SurfaceModuli, n: int = 96) -> HolomorphicBasis:
    """Solve the loop-normalization linear system for the differentials."""
    G = S.genus
    if G == 0:
        return HolomorphicBasis(np.zeros((0, 0)), 0.0, 1.0)
    M = _monomial_a_periods(S, n=n)
    cond = float(np.linalg.cond(M))
    X = np.linalg.solve(M, 2j * np.pi * np.eye(G))
    coeffs = X.T.copy()
    Mf = _monomial_a_periods(S, n=2 * n)
    resid = float(np.max(np.abs(Mf @ X - 2j * np.pi * np.eye(G))))
    return HolomorphicBasis(coeffs, resid, cond)


@dataclass(frozen=True)
class PeriodMatrix:
    """Matrix of through-cycle periods of the normalized differentials.

    b_sign records the orientation chosen for the through-cycles: the raw
    realization is kept if its real part comes out negative definite and
    reversed otherwise, and every later b-period (the second-kind wave
    numbers) must be multiplied by the same sign.  a_shifts holds the
    integer matrix of loop corrections applied to symmetrize the raw
    periods (the collapsed through-paths all pass the base branch point,
    where they intersect pairwise, so the raw realization can be off by
    exact loop periods); adding loops to the through-cycles alters no
    later quantity, because the second-kind differential has vanishing
    loop periods and only diagonal entries feed the constants."""

    H: np.ndarray
    symmetry_residual: float
    max_real_eigenvalue: float
    b_sign: float = 1.0
    a_shifts: np.ndarray | None = None

    @property
    def genus(self) -> int:
        return len(self.H)


def period_matrix(S: SurfaceModuli, basis: HolomorphicBasis) -> PeriodMatrix:
    """Through-cycle periods; symmetry and a negative-definite real part
    certify that the realized cycles form a canonical pairing."""
    G = S.genus
    H = np.zeros((G, G), dtype=complex)
    for j in range(G):
        for k in range(G):
            H[j, k] = through_path_integral(S, j + 1, basis.coeffs[k])
    shifts = np.zeros((G, G), dtype=int)
    if G > 1:
        M = (H - H.T) / (2j * np.pi)
        Mi = np.round(np.real(M)).astype(int)
        off = float(np.max(np.abs(M - Mi)))
        if off > 1e-2:
            raise RuntimeError(
                f"period antisymmetry is not an integer lattice defect ({off:.2e})"
            )
        shifts = -np.tril(Mi, -1)
        H = H + 2j * np.pi * shifts
    if G:
        # reduce Im H_kk into (-pi, pi] (shifting a cycle by its own
        # loop), which balances mirror-paired cuts into conjugate pairs
        diag_m = -np.round(np.imag(np.diag(H)) / (2 * np.pi)).astype(int)
        shifts = shifts + np.diag(diag_m)
        H = H + 2j * np.pi * np.diag(diag_m)
    sym = float(np.max(np.abs(H - H.T))) if G else 0.0
    b_sign = 1.0
    if G:
        reH = 0.5 * (np.real(H) + np.real(H).T)
        emax = float(np.max(np.linalg.eigvalsh(reH)))
        if emax > 0:
            H = -H
            b_sign = -1.0
            reH = 0.5 * (np.real(H) + np.real(H).T)
            emax = float(np.max(np.linalg.eigvalsh(reH)))
    else:
        emax = -np.inf
    return PeriodMatrix(H, sym, emax, b_sign, shifts)


# --------------------------------------------------------------------------
# theta sums
# --------------------------------------------------------------------------

def theta_tail_radius(H: np.ndarray, w: np.ndarray, tol: float = 1e-12) -> int:
    """Lattice truncation radius from the Gaussian tail bound: terms decay
    like exp(-sigma_min |n|^2 / 2 + |n| |Re w|)."""
    G = len(H)
    if G == 0:
        return 0
    sig = -np.max(np.linalg.eigvalsh(0.5 * (np.real(H) + np.real(H).T)))
    if sig <= 0:
        raise ValueError("real part of the period matrix must be negative definite")
    rho = float(np.linalg.norm(np.real(w))) if len(w) else 0.0
    budget = -np.log(tol) + 4.0 + 2.0 * G
    N = (rho + np.sqrt(rho * rho + 2.0 * sig * budget)) / sig
    return int(min(max(np.ceil(N) + 2, 3), 80))


def theta_eval(w, H, tol: float = 1e-12):
    """Theta sum over the integer lattice: sum exp(n.H.n/2 + n.w).

    Genus 0 gives the single empty term 1.  Terms are summed with the
    largest real exponent factored out, so moderate growth in Re w does
    not overflow."""
    H = np.asarray(H, dtype=complex)
    w = np.asarray(w, dtype=complex).reshape(-1)
    G = len(H)
    if G == 0:
        return 1.0 + 0.0j
    if len(w) != G:
        raise ValueError("argument length must equal the genus")
    N = theta_tail_radius(H, w, tol)
    while (2 * N + 1) ** G > 4_000_000 and N > 3:
        N -= 1
    rng = np.arange(-N, N + 1)
    grids = np.meshgrid(*([rng] * G), indexing="ij")
    n = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    expo = 0.5 * np.einsum("ni,ij,nj->n", n, H, n) + n @ w
    shift = np.max(np.real(expo))
    return np.exp(shift) * np.sum(np.exp(expo - shift))


# --------------------------------------------------------------------------
# Abel map
# --------------------------------------------------------------------------

def _branch_exit(S: SurfaceModuli, pt):
    """Outward direction and offset for leaving a branch point without
    touching its own chord."""
    for c in S.cuts:
        for this, other in ((c.p, c.q), (c.q, c.p)):
            if abs(pt - this) < 1e-10:
                e = (this - other) / abs(this - other)
                d = min(0.35 * S.scale, max(0.3 * abs(c.r), 0.07 * S.scale))
                return e, d
    return None, None


def _sqrt_leg(S: SurfaceModuli, coeffs, pt, exit_dir, d0, reverse=False, gl=_GL32):
    """Integral of poly/R dlam between a branch point and the offset point
    pt + exit_dir*d0; the square-root vanishing of R is absorbed by the
    quadratic substitution lam = pt + exit_dir s^2.  reverse integrates
    toward the branch point."""
    xg, wg = gl
    s_nodes = 0.5 * (xg + 1.0) * np.sqrt(d0)
    s_half = 0.5 * np.sqrt(d0)
    lam = pt + exit_dir * s_nodes**2
    vals = _poly_eval(coeffs, lam) / R_eval(S, lam)
    out = s_half * np.sum(wg * vals * 2.0 * s_nodes * exit_dir)
    return -out if reverse else out


def abel_map(S: SurfaceModuli, basis: HolomorphicBasis, lam, sheet: int = 1):
    """Vector of integrals of the normalized differentials from the base
    branch point (top of the central cut, first sheet) to the target.

    The value is defined modulo the period lattice; the raw value for
    one concrete routed path is returned (reduce with lattice_reduce).
    Branch-point targets are reached with a square-root-absorbing final
    leg.  Second-sheet targets use the sheet involution, which negates
    the vector because the base is a branch point."""
    lam = complex(lam)
    G = S.genus
    if G == 0:
        return np.zeros(0, dtype=complex)
    out = np.array(
        [_base_to_point_integral(S, basis.coeffs[k], lam) for k in range(G)],
        dtype=complex,
    )
    return out if sheet == 1 else -out


def abel_infinity(S: SurfaceModuli, basis: HolomorphicBasis):
    """Abel vector of the first-sheet infinity: integrate to a distant
    point along a chord-clearing ray, then close the tail with the
    inverted-variable series in which the integrand is analytic."""
    G = S.genus
    if G == 0:
        return np.zeros(0, dtype=complex)
    Rbig = 4.0 * S.scale
    lam_R = None
    for ang in (0.5, 0.25, 0.75, 0.1, 0.9, 1.25, 1.75, 1.5):
        cand = Rbig * np.exp(1j * np.pi * ang)
        ray_clear = all(
            _segment_clearance(cand, cand * 50.0, c) > 0.02 * S.scale
            for c in S.cuts
        )
        if not ray_clear:
            continue
        try:
            A = abel_map(S, basis, cand)
        except RuntimeError:
            continue
        lam_R = cand
        break
    if lam_R is None:
        raise RuntimeError("no clear ray to infinity")
    lam_k = S.points
    sR = 1.0 / lam_R
    xg, wg = _GL32
    s_nodes = 0.5 * sR * (xg + 1.0)
    s_half = 0.5 * sR
    W = np.ones_like(s_nodes)
    for p in lam_k:
        W = W * (1.0 - p * s_nodes)
    W = np.sqrt(W)
    tail = np.zeros(G, dtype=complex)
    for k in range(G):
        ck = basis.coeffs[k]
        F = np.zeros_like(s_nodes)
        for j, cj in enumerate(ck):
            F = F + cj * s_nodes ** (G - 1 - j)
        tail[k] = -s_half * np.sum(wg * F / W)
    return A + tail


def lattice_reduce(v, H):
    """Shift v by the nearest lattice vector 2*pi*i*m + H n (integer m, n)
    via real least squares plus rounding; returns (reduced, m, n)."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    G = len(v)
    if G == 0:
        return v.copy(), np.zeros(0, int), np.zeros(0, int)
    cols = np.hstack([2j * np.pi * np.eye(G), H])
    Areal = np.vstack([np.real(cols), np.imag(cols)])
    rhs = np.concatenate([np.real(v), np.imag(v)])
    sol, *_ = np.linalg.lstsq(Areal, rhs, rcond=None)
    mn = np.round(sol).astype(int)
    best = v - cols @ mn
    for k in range(2 * G):
        for d in (-1, 1):
            cand_mn = mn.copy()
            cand_mn[k] += d
            cand = v - cols @ cand_mn
            if np.linalg.norm(cand) < np.linalg.norm(best):
                best, mn = cand, cand_mn
    return best, mn[:G], mn[G:]


# --------------------------------------------------------------------------
# Riemann constants
# --------------------------------------------------------------------------

def _around_loop_points(S: SurfaceModuli, cut_index: int, M: int = 1024):
    """Closed counterclockwise loop around one chord, as an ellipse in the
    chord frame sized to clear the other cuts."""
    cut = S.cuts[cut_index]
    mu = 0.45
    for j, c in enumerate(S.cuts):
        if j == cut_index:
            continue
        gap = _segment_clearance(cut.p, cut.q, c) / max(abs(cut.r), 1e-300)
        mu = min(mu, 0.4 * gap)
    mu = max(mu, 0.02)
    th = 2.0 * np.pi * np.arange(M) / M
    zeta = (1.0 + mu) * np.cos(th) + 1j * mu * np.sin(th)
    return cut.m + cut.r * zeta


def riemann_constants(
    S: SurfaceModuli, basis: HolomorphicBasis, H: np.ndarray, M: int = 2048
):
    """Constant vector of the theta divisor: pi*i + H_kk/2 minus the
    cross-terms of loop averages of (k-th Abel integral) against the
    other differentials, accumulated spectrally on the closed loops.
    Defined modulo the period lattice (the base paths fix a
    representative)."""
    G = S.genus
    K = np.zeros(G, dtype=complex)
    loop_cache = {}
    for j in range(G):
        pts = _around_loop_points(S, j + 1, M)
        dz = np.roll(pts, -1) - pts
        mid = pts + 0.5 * dz
        nu = {}
        for k in range(G):
            nu[k] = _poly_eval(basis.coeffs[k], mid) / R_eval(S, mid)
        A0 = abel_map(S, basis, pts[0])
        loop_cache[j] = (dz, nu, A0)
    for k in range(G):
        acc = 0.0 + 0.0j
        for j in range(G):
            if j == k:
                continue
            dz, nu, A0 = loop_cache[j]
            inc = nu[k] * dz
            Ak = A0[k] + np.concatenate([[0.0], np.cumsum(inc)[:-1]]) + 0.5 * inc
            acc += np.sum(nu[j] * dz * Ak)
        K[k] = 1j * np.pi + 0.5 * H[k, k] - acc / (2j * np.pi)
    return K


# --------------------------------------------------------------------------
# second-kind differential and wave numbers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OmegaDifferential:
    """(q + sum_i d_i * nu-numerators)/R dlam: polynomial part matched to
    the phase differential at the first-sheet infinity (and to its
    negative at the second), zero loop integrals around the non-central
    cuts, no residues."""

    q_coeffs: np.ndarray
    d: np.ndarray


def _series_sqrt(poly2, order):
    """Power series (low-to-high) of sqrt of a series with constant term
    1, by the exact coefficient recursion for the squared relation."""
    f = np.zeros(order + 1, dtype=complex)
    src = np.asarray(poly2, dtype=complex)
    f[: min(len(src), order + 1)] = src[: order + 1]
    w = np.zeros(order + 1, dtype=complex)
    w[0] = 1.0
    for n in range(1, order + 1):
        inner = np.sum(w[1:n] * w[n - 1 : 0 : -1]) if n > 1 else 0.0
        w[n] = 0.5 * (f[n] - inner)
    return w


def omega_and_U(
    S: SurfaceModuli, basis: HolomorphicBasis, p_coeffs, b_sign: float = 1.0
):
    """Second-kind differential matched to the derivative of the phase
    polynomial at the two infinities, and its through-cycle periods.

    The polynomial part is the non-negative-power part of p'(lam) *
    R(lam), computed from the inverted-variable series of R; the
    leftover behaves like lam^(-G-2) relative to R, so no residue
    appears and the loop conditions are restored with a holomorphic
    correction solved in closed form from the normalization.  b_sign
    must be the orientation recorded in the period matrix so the wave
    numbers live in the same homology convention."""
    G = S.genus
    p_coeffs = np.asarray(p_coeffs, dtype=complex)
    if G > 0 and len(p_coeffs) - 1 > G:
        raise ValueError("phase polynomial degree exceeds the genus")
    dp = np.array(
        [m * p_coeffs[m] for m in range(1, len(p_coeffs))], dtype=complex
    )
    if len(dp) == 0:
        dp = np.zeros(1, dtype=complex)
    # prod (lam - z) written high-to-low in lam is, coefficient for
    # coefficient, prod (1 - z s) low-to-high in s = 1/lam
    poly2 = np.array([1.0 + 0.0j])
    for z in S.points:
        poly2 = np.convolve(poly2, np.array([1.0, -z]))
    order = len(dp) + G + 2
    w = _series_sqrt(poly2, order)
    q = np.zeros(len(dp) + G + 2, dtype=complex)
    for m, dpm in enumerate(dp):
        for n_w, wn in enumerate(w):
            power = m + G + 1 - n_w
            if power >= 0:
                q[power] += -dpm * wn
    if G == 0:
        return OmegaDifferential(q, np.zeros(0)), np.zeros(0, dtype=complex)
    Q = np.array(
        [band_collapse_integral(S, j + 1, q) for j in range(G)], dtype=complex
    )
    d = -Q / (2j * np.pi)
    full = np.zeros(max(len(q), G), dtype=complex)
    full[: len(q)] += q
    for i in range(G):
        full[:G] += d[i] * basis.coeffs[i]
    U = np.array(
        [b_sign * through_path_integral(S, j + 1, full) for j in range(G)],
        dtype=complex,
    )
    return OmegaDifferential(q, d), U


@dataclass(frozen=True)
class WaveVectors:
    """Assembled wave vectors of the slow modulation."""

    V1: np.ndarray
    V2: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    A_inf: np.ndarray
    U0: float


def wave_vectors(
    S: SurfaceModuli,
    basis: HolomorphicBasis,
    H: np.ndarray,
    theta1: float = 0.0,
    alpha0: float = 0.0,
) -> WaveVectors:
    """Wave vectors from first-sheet Abel values of the alternately
    mirrored branch points, the infinity vector, and the diagonal of the
    period matrix; the scalar phase rate combines the first-gap constant
    with the through-zero band constant."""
    G = S.genus
    Ainf = abel_infinity(S, basis)
    acc = np.zeros(G, dtype=complex)
    for idx in range(1, G + 1):
        pt = S.upper[idx]
        target = np.conj(pt) if idx % 2 == 1 else pt
        acc = acc + abel_map(S, basis, target)
    diag = np.array([H[k, k] for k in range(G)], dtype=complex)
    V1 = acc + Ainf + 1j * np.pi + 0.5 * diag
    V2 = acc - Ainf + 1j * np.pi + 0.5 * diag
    Y = -Ainf - V1
    Z = Ainf - V1
    return WaveVectors(V1, V2, Y, Z, Ainf, float(-(theta1 + alpha0)))


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def _c2l(arr):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _l2c(lst):
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def surface_to_dict(S, basis, pm, wv=None, U=None, K=None):
    out = {
        "branch_points": _c2l(np.asarray(S.upper)),
        "genus": S.genus,
        "coeffs": _c2l(basis.coeffs) if S.genus else [],
        "H": _c2l(pm.H) if S.genus else [],
        "a_period_residual": basis.a_period_residual,
        "H_symmetry_residual": pm.symmetry_residual,
        "H_max_real_eigenvalue": pm.max_real_eigenvalue,
        "b_sign": pm.b_sign,
    }
    if wv is not None:
        out["V1"] = _c2l(wv.V1)
        out["V2"] = _c2l(wv.V2)
        out["Y"] = _c2l(wv.Y)
        out["Z"] = _c2l(wv.Z)
        out["A_inf"] = _c2l(wv.A_inf)
        out["U0"] = wv.U0
    if U is not None:
        out["U"] = _c2l(U)
    if K is not None:
        out["K"] = _c2l(K)
    return out


def surface_from_dict(d):
    S = SurfaceModuli(tuple(_l2c(d["branch_points"])), strict=False)
    basis = HolomorphicBasis(
        _l2c(d["coeffs"]) if d["genus"] else np.zeros((0, 0)),
        d["a_period_residual"],
        1.0,
    )
    H = _l2c(d["H"]) if d["genus"] else np.zeros((0, 0))
    return S, basis, H


def surface_json(path, d):
    with open(path, "w") as f:
        json.dump(d, f, indent=1)
