"""Error norms, convergence rates, field probing, and monotonicity checks.

Pure functions over solved fields. Norms compare fields on coincident nodes
only (nested grids, no interpolation), so measured rates reflect the scheme
and not the comparison. Rates follow the doubling convention
rate_k = log2(e_k / e_{k+1}); the rate sits on the coarser row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fd import FieldGrid

NEG_TOL = 1e-10  # slack for calling a finite difference "negative"

# nodes snapped when x*N lands within this of an integer; covers the
# round-trip error of (i/N)*N so probing at a node returns the stored
# value bitwise
_SNAP = 1e-9


@dataclass(frozen=True)
class ConvergenceRow:
    """One line of a refinement study: resolution, error, observed order.

    rate compares this row to the next finer one, so the finest row carries
    None.
    """

    N: int
    error: float
    rate: float | None = None


@dataclass(frozen=True)
class MonotonicityReport:
    """Minima of the nodal forward differences in each index direction and
    how many fall below -NEG_TOL."""

    min_difx: float
    min_dify: float
    n_neg_difx: int
    n_neg_dify: int

    @property
    def clean(self) -> bool:
        return self.n_neg_difx == 0 and self.n_neg_dify == 0


def _coincident(va: FieldGrid, vb: FieldGrid) -> tuple[np.ndarray, np.ndarray]:
    if va.N == vb.N:
        return va.values, vb.values
    if va.N > vb.N:
        if va.N % vb.N:
            raise ValueError(f"grids not nested: N={va.N} vs N={vb.N}")
        r = va.N // vb.N
        return va.values[::r, ::r], vb.values
    if vb.N % va.N:
        raise ValueError(f"grids not nested: N={va.N} vs N={vb.N}")
    r = vb.N // va.N
    return va.values, vb.values[::r, ::r]


def norms(va: FieldGrid, vb: FieldGrid) -> tuple[float, float]:
    """(mean, max) absolute difference over coincident nodes.

    Grids must be equal or nested (one N dividing the other); the
    comparison runs on the coarser grid's nodes.
    """
    a, b = _coincident(va, vb)
    d = np.abs(a - b)
    return float(d.mean()), float(d.max())


def rates(errors) -> list[float]:
    """Observed orders log2(e_k / e_{k+1}) for a doubling-N error sequence."""
    e = [float(v) for v in errors]
    if len(e) < 2:
        raise ValueError("need at least two errors to form a rate")
    for v in e:
        if not v > 0.0:
            raise ValueError(f"errors must be positive, got {v}")
    return [math.log2(e[k] / e[k + 1]) for k in range(len(e) - 1)]


def convergence_rows(Ns, errors) -> list[ConvergenceRow]:
    """Assemble study rows, attaching each rate to its coarser row."""
    Ns = [int(n) for n in Ns]
    if len(Ns) != len(errors):
        raise ValueError("need one error per resolution")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise ValueError(f"resolutions must double: {a} followed by {b}")
    rs = rates(errors) if len(errors) >= 2 else []
    rows = [ConvergenceRow(n, float(e), r)
            for n, e, r in zip(Ns, errors, rs)]
    rows.append(ConvergenceRow(Ns[-1], float(errors[-1]), None))
    return rows


def _locate(s: float, N: int) -> tuple[int, float]:
    t = s * N
    i0 = int(math.floor(t))
    frac = t - i0
    if frac < _SNAP:
        frac = 0.0
    elif frac > 1.0 - _SNAP:
        i0 += 1
        frac = 0.0
    if i0 >= N:  # top node, or snapped onto it
        return N - 1, 1.0
    return i0, frac


def probe(V: FieldGrid, x: float, z: float) -> float:
    """Bilinear interpolation of the field; exact at nodes."""
    if not (0.0 <= x <= 1.0 and 0.0 <= z <= 1.0):
        raise ValueError(f"probe point ({x}, {z}) outside the unit square")
    i0, fx = _locate(float(x), V.N)
    j0, fz = _locate(float(z), V.N)
    v = V.values
    return float((1.0 - fx) * (1.0 - fz) * v[i0, j0]
                 + fx * (1.0 - fz) * v[i0 + 1, j0]
                 + (1.0 - fx) * fz * v[i0, j0 + 1]
                 + fx * fz * v[i0 + 1, j0 + 1])


def monotonicity_report(V: FieldGrid) -> MonotonicityReport:
    """Check the solved field is nondecreasing in both grid directions."""
    v = V.values
    difx = v[1:, :] - v[:-1, :]
    dify = v[:, 1:] - v[:, :-1]
    return MonotonicityReport(
        min_difx=float(difx.min()),
        min_dify=float(dify.min()),
        n_neg_difx=int(np.count_nonzero(difx < -NEG_TOL)),
        n_neg_dify=int(np.count_nonzero(dify < -NEG_TOL)),
    )
