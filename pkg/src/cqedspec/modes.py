"""
Normal modes of the single-excitation manifold.

In the Dicke basis {atomic_1 ... atomic_M, photonic} the interaction matrix is a
real symmetric arrowhead: the atomic resonances on the diagonal, the cavity
detuning in the corner ("hub") and the collective couplings G_i on the border.
We use the probe-detuning convention, so the eigenvalues are directly the
normal-mode positions on the transmission axis.  The level-energy form used for
the four-level quartic (diagonal ``0, 4d, 6d, -delta_c``) is the negative of
this matrix up to a basis permutation; see :func:`level_energy_matrix`.

Eigenvalues are found from the secular equation::

    f(lam) = delta_c - lam - sum_i G_i**2 / (offset_i - lam) = 0

which has exactly one root between consecutive atomic resonances and one
outside on either side (after deflating zero couplings and repeated
resonances).  All roots are bracketed and bisected simultaneously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError, ValidationError
from .model import CollectiveCoupling, TransitionLadder

__all__ = [
    "ModeMatrix",
    "PolaritonModes",
    "BranchScan",
    "QuarticAudit",
    "mode_matrix",
    "eigenmodes",
    "characteristic_polynomial",
    "paper_quartic_coefficients",
    "level_energy_matrix",
    "audit_quartic",
    "poly_roots",
    "branch_scan",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ModeMatrix:
    """Real symmetric arrowhead matrix; the last basis state is the photon."""

    diagonal: np.ndarray
    border: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float).ravel()
        border = np.array(self.border, dtype=float).ravel()
        if diag.size != border.size + 1:
            raise ValidationError("border", f"need {diag.size - 1} couplings for a {diag.size}x{diag.size} matrix")
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(border))):
            raise ValidationError("mode_matrix", "entries must be finite")
        diag.setflags(write=False)
        border.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "border", border)

    @property
    def dim(self) -> int:
        return self.diagonal.size

    @property
    def hub(self) -> float:
        return float(self.diagonal[-1])

    @property
    def leaves(self) -> np.ndarray:
        return self.diagonal[:-1]

    def dense(self) -> np.ndarray:
        a = np.diag(self.diagonal)
        a[:-1, -1] = self.border
        a[-1, :-1] = self.border
        return a


@dataclass(frozen=True, eq=False)
class PolaritonModes:
    """Eigen-decomposition of a :class:`ModeMatrix`.

    ``vectors[k]`` is the normalized eigenvector of ``eigenvalues[k]``;
    ``weights[k]`` its squared components over [atomic_1..atomic_M, photonic].
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.square(self.vectors)

    @property
    def photonic_fraction(self) -> np.ndarray:
        return self.weights[:, -1]

    def __len__(self):
        return self.eigenvalues.size


def mode_matrix(ladder: TransitionLadder, coupling: CollectiveCoupling, delta_c: float) -> ModeMatrix:
    if ladder.size != coupling.size:
        raise ValidationError("coupling", f"{coupling.size} strengths given for {ladder.size} transitions")
    return ModeMatrix(np.array(ladder.offsets + (float(delta_c),)), np.array(coupling.strengths))


def _bisect_secular(d, z2, hub):
    """All roots of ``hub - lam - sum(z2 / (d - lam))`` for sorted distinct ``d``."""
    n = d.size
    radius = np.sqrt(z2).sum()
    lo = min(d[0], hub) - radius - 1.0
    hi = max(d[-1], hub) + radius + 1.0
    a = np.concatenate(([lo], d))
    b = np.concatenate((d, [hi]))

    def f(lam):
        return hub - lam - (z2[None, :] / (d[None, :] - lam[:, None])).sum(axis=1)

    for _ in range(256):
        mid = 0.5 * (a + b)
        stuck = (mid <= a) | (mid >= b)
        if np.all(stuck):
            break
        fm = f(mid)
        if not np.all(np.isfinite(fm[~stuck])):
            raise NumericalError("secular function evaluated to a non-finite value")
        right = (fm > 0) & ~stuck
        left = (fm <= 0) & ~stuck
        a = np.where(right, mid, a)
        b = np.where(left, mid, b)
    else:
        raise NumericalError(f"secular bisection did not converge for {n + 1} roots")
    return 0.5 * (a + b)


def _secular_eigh(m: ModeMatrix):
    leaves = m.leaves
    z = m.border
    hub = m.hub
    n = leaves.size
    scale = max(np.abs(m.diagonal).max(), np.abs(z).max(), 1.0)
    tol = 8 * _EPS * scale

    values: list[float] = []
    vectors: list[np.ndarray] = []

    # decoupled leaves keep their diagonal entry
    coupled = np.abs(z) > tol
    for i in np.flatnonzero(~coupled):
        v = np.zeros(n + 1)
        v[i] = 1.0
        values.append(float(leaves[i]))
        vectors.append(v)

    # repeated resonances: one bright combination stays coupled, the rest are dark
    idx = np.flatnonzero(coupled)
    idx = idx[np.argsort(leaves[idx], kind="stable")]
    groups: list[np.ndarray] = []
    for i in idx:
        if groups and abs(leaves[i] - leaves[groups[-1][0]]) <= tol:
            groups[-1] = np.append(groups[-1], i)
        else:
            groups.append(np.array([i]))

    red_d, red_z, red_basis = [], [], []
    for g in groups:
        zg = z[g]
        r = float(np.linalg.norm(zg))
        bright = np.zeros(n + 1)
        bright[g] = zg / r
        red_d.append(float(leaves[g[0]]))
        red_z.append(r)
        red_basis.append(bright)
        if g.size > 1:
            q, _ = np.linalg.qr(np.column_stack([zg / r, np.eye(g.size)[:, : g.size - 1]]))
            for col in range(1, g.size):
                v = np.zeros(n + 1)
                v[g] = q[:, col]
                values.append(float(leaves[g[0]]))
                vectors.append(v)

    photon = np.zeros(n + 1)
    photon[-1] = 1.0
    if not red_d:
        values.append(hub)
        vectors.append(photon)
    else:
        d = np.array(red_d)
        rz = np.array(red_z)
        roots = _bisect_secular(d, rz**2, hub)
        basis = np.array(red_basis)
        for lam in roots:
            denom = lam - d
            # a root sitting on a pole to working precision is a leaf state
            hit = np.abs(denom) <= 4 * _EPS * max(abs(lam), 1.0)
            if np.any(hit):
                comps = np.where(hit, 1.0, 0.0)
                v = comps @ basis
            else:
                comps = rz / denom
                v = comps @ basis + photon
            values.append(float(lam))
            vectors.append(v / np.linalg.norm(v))

    order = np.argsort(values, kind="stable")
    return np.array(values)[order], np.array(vectors)[order]


def eigenmodes(m: ModeMatrix, method: str = "secular") -> PolaritonModes:
    """Eigenvalues (ascending) and eigenvectors of an arrowhead :class:`ModeMatrix`.

    ``method="secular"`` uses deflation plus bisection on the secular
    equation; ``method="dense"`` defers to LAPACK's symmetric solver.
    """
    if method == "secular":
        vals, vecs = _secular_eigh(m)
    elif method == "dense":
        vals, cols = np.linalg.eigh(m.dense())
        vecs = cols.T
    else:
        raise ValidationError("method", f"unknown method {method!r}")
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise NumericalError("eigen-decomposition produced non-finite output")
    # fix the sign so the photonic component (or first nonzero one) is positive
    for k in range(vecs.shape[0]):
        j = -1 if abs(vecs[k, -1]) > 1e-12 else int(np.argmax(np.abs(vecs[k]) > 1e-12))
        if vecs[k, j] < 0:
            vecs[k] = -vecs[k]
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return PolaritonModes(vals, vecs)


def characteristic_polynomial(m: ModeMatrix) -> np.ndarray:
    """Coefficients ``[c0, ..., c_{M+1}]`` of the monic ``det(lam I - A)``.

    Uses the arrowhead expansion
    ``(lam - hub) prod(lam - d_j) - sum_i G_i**2 prod_{j != i}(lam - d_j)``.
    """
    d = m.leaves
    coeffs = P.polymul(P.polyfromroots(d), [-m.hub, 1.0])
    for i, g in enumerate(m.border):
        if g != 0.0:
            coeffs = P.polysub(coeffs, g * g * P.polyfromroots(np.delete(d, i)))
    return np.asarray(coeffs, dtype=float)


def paper_quartic_coefficients(G: float, delta: float, delta_c: float) -> np.ndarray:
    """The four-level quartic exactly as published, ascending powers.

    ``lam^4 + (dc + 10d) lam^3 + (24d^2 - 3G^2 - 10d dc) lam^2
    + (20d G^2 + 24d^2 dc) lam + 24 G^2 d^2``.  Kept verbatim for auditing
    only; it does not equal the determinant of the matrix it was derived from.
    """
    g2 = G * G
    return np.array([
        24.0 * g2 * delta**2,
        20.0 * delta * g2 + 24.0 * delta**2 * delta_c,
        24.0 * delta**2 - 3.0 * g2 - 10.0 * delta * delta_c,
        delta_c + 10.0 * delta,
        1.0,
    ])


def level_energy_matrix(G: float, delta: float, delta_c: float) -> np.ndarray:
    """Dense 4x4 matrix in the level-energy convention, basis (|4>, |3>, |2>, photon).

    Splittings are ``d23 = 2 delta`` and ``d34 = 4 delta``.  Its negative is
    permutation-similar to :func:`mode_matrix` for the same ladder.
    """
    return np.array([
        [0.0, 0.0, 0.0, G],
        [0.0, 4.0 * delta, 0.0, G],
        [0.0, 0.0, 6.0 * delta, G],
        [G, G, G, -delta_c],
    ])


@dataclass(frozen=True)
class QuarticAudit:
    """Published four-level quartic versus the determinant it should equal."""

    G: float
    delta: float
    delta_c: float
    printed: tuple[float, ...]
    expanded: tuple[float, ...]  # det(lam I - B), B = level_energy_matrix
    expanded_probe: tuple[float, ...]  # same matrix in the probe-detuning convention
    mismatched_powers: tuple[int, ...]
    mismatched_powers_probe: tuple[int, ...]
    eigenvalues: tuple[float, ...]  # of B, ascending
    printed_roots: tuple[complex, ...]
    printed_roots_match: bool
    printed_roots_match_negated: bool

    @property
    def consistent(self) -> bool:
        return not self.mismatched_powers

    def to_dict(self) -> dict:
        return {
            "G": self.G,
            "delta": self.delta,
            "delta_c": self.delta_c,
            "coefficients_ascending": {
                "printed": list(self.printed),
                "determinant_level_energy": list(self.expanded),
                "determinant_probe_detuning": list(self.expanded_probe),
            },
            "mismatched_powers": list(self.mismatched_powers),
            "mismatched_powers_probe": list(self.mismatched_powers_probe),
            "consistent": self.consistent,
            "eigenvalues_level_energy": list(self.eigenvalues),
            "printed_roots": [[r.real, r.imag] for r in self.printed_roots],
            "printed_roots_match_eigenvalues": self.printed_roots_match,
            "printed_roots_match_negated_eigenvalues": self.printed_roots_match_negated,
        }


def _mismatch(a, b, rtol=1e-9):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.abs(a).max(), np.abs(b).max(), 1.0)
    return tuple(int(k) for k in np.flatnonzero(np.abs(a - b) > rtol * scale))


def _same_roots(roots, target, tol):
    if np.max(np.abs(np.imag(roots))) > tol:
        return False
    return bool(np.allclose(np.sort(np.real(roots)), np.sort(target), atol=tol, rtol=0))


def audit_quartic(G: float, delta: float, delta_c: float) -> QuarticAudit:
    """Compare the published quartic with the expanded determinant at one point."""
    printed = paper_quartic_coefficients(G, delta, delta_c)
    b = level_energy_matrix(G, delta, delta_c)
    expanded = characteristic_polynomial(ModeMatrix(np.diag(b), b[:-1, -1]))
    probe = ModeMatrix([-6.0 * delta, -4.0 * delta, 0.0, delta_c], [G, G, G])
    expanded_probe = characteristic_polynomial(probe)
    eig = np.linalg.eigvalsh(b)
    roots = poly_roots(printed)
    tol = 1e-6 * max(1.0, np.abs(eig).max())
    return QuarticAudit(
        G=float(G),
        delta=float(delta),
        delta_c=float(delta_c),
        printed=tuple(float(c) for c in printed),
        expanded=tuple(float(c) for c in expanded),
        expanded_probe=tuple(float(c) for c in expanded_probe),
        mismatched_powers=_mismatch(printed, expanded),
        mismatched_powers_probe=_mismatch(printed, expanded_probe),
        eigenvalues=tuple(float(x) for x in eig),
        printed_roots=tuple(complex(r) for r in roots),
        printed_roots_match=_same_roots(roots, eig, tol),
        printed_roots_match_negated=_same_roots(roots, -eig, tol),
    )


def poly_roots(coefficients) -> np.ndarray:
    """All complex roots of ``sum c_k x**k`` (ascending coefficients).

    Eigenvalues of the companion matrix, each polished by Newton steps that
    are kept only when they reduce the residual.
    """
    c = np.asarray(coefficients, dtype=complex).ravel()
    if c.size == 0 or c[-1] == 0:
        raise ValidationError("coefficients", "leading coefficient must be nonzero")
    n = c.size - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    monic = c / c[-1]
    comp = np.zeros((n, n), dtype=complex)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -monic[:-1]
    roots = np.linalg.eigvals(comp)
    deriv = P.polyder(c)
    for k, r in enumerate(roots):
        best = abs(P.polyval(r, c))
        for _ in range(3):
            dp = P.polyval(r, deriv)
            if dp == 0:
                break
            cand = r - P.polyval(r, c) / dp
            res = abs(P.polyval(cand, c))
            if res >= best:
                break
            r, best = cand, res
        roots[k] = r
    if np.all(np.isreal(c)):
        roots = np.where(np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots)), roots.real + 0j, roots)
    return roots[np.lexsort((roots.imag, roots.real))]


@dataclass(frozen=True, eq=False)
class BranchScan:
    """Normal modes versus cavity detuning.

    ``sorted[k]`` holds the ascending eigenvalues at ``delta_c[k]``;
    ``branches[k]`` the same values ordered so that each column follows one
    branch continuously.
    """

    delta_c: np.ndarray
    sorted: np.ndarray
    branches: np.ndarray
    modes: tuple[PolaritonModes, ...] = field(repr=False)


def _track(prev, slope, dc0, dc1, vals1, eig_at, depth):
    pred = prev + slope * (dc1 - dc0)
    cost = np.abs(pred[:, None] - vals1[None, :])
    rows, cols = linear_sum_assignment(cost)
    ordered = vals1[cols[np.argsort(rows)]]
    miss = np.abs(ordered - pred).max()
    gaps = np.diff(np.sort(vals1))
    if depth > 0 and gaps.size and miss > 0 and gaps.min() < 10.0 * miss:
        mid = 0.5 * (dc0 + dc1)
        mid_vals = _track(prev, slope, dc0, mid, eig_at(mid), eig_at, depth - 1)
        mid_slope = (mid_vals - prev) / (mid - dc0)
        return _track(mid_vals, mid_slope, mid, dc1, vals1, eig_at, depth - 1)
    return ordered


def branch_scan(ladder: TransitionLadder, coupling: CollectiveCoupling, dc_values, max_refine: int = 8) -> BranchScan:
    """Eigenvalues over a strictly increasing list of cavity detunings."""
    dcs = np.asarray(dc_values, dtype=float).ravel()
    if dcs.size == 0:
        raise ValidationError("dc_values", "need at least one cavity detuning")
    if np.any(np.diff(dcs) <= 0):
        raise ValidationError("dc_values", "must be strictly increasing")

    def eig_at(dc):
        return eigenmodes(mode_matrix(ladder, coupling, dc)).eigenvalues

    modes = tuple(eigenmodes(mode_matrix(ladder, coupling, dc)) for dc in dcs)
    srt = np.array([m.eigenvalues for m in modes])
    branches = np.empty_like(srt)
    branches[0] = srt[0]
    slope = np.zeros(srt.shape[1])
    for k in range(1, dcs.size):
        branches[k] = _track(branches[k - 1], slope, dcs[k - 1], dcs[k], srt[k], eig_at, max_refine)
        slope = (branches[k] - branches[k - 1]) / (dcs[k] - dcs[k - 1])
    return BranchScan(dcs, srt, branches, modes)
