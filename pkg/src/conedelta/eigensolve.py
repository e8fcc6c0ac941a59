"""Lowest eigenpairs and Sylvester-inertia counts for a :class:`Pencil`."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import Pencil
from .errors import InvalidInput, NumericalFailure

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


class SymmetricFactorization:
    """LDL^T-type factorization of a sparse symmetric (indefinite) matrix.

    SuperLU runs in symmetric mode with diagonal pivoting only, so the
    factorization is ``P B P^T = L U`` with ``U = D L^T``; the signs of
    ``diag(U)`` give the inertia of ``B`` by Sylvester's law.
    """

    def __init__(self, B: sp.spmatrix):
        B = sp.csc_matrix(B)
        try:
            lu = spla.splu(B, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise NumericalFailure(f"factorization failed: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise NumericalFailure("factorization used off-diagonal pivots; inertia unavailable")
        d = lu.U.diagonal()
        if not np.all(np.isfinite(d)):
            raise NumericalFailure("non-finite pivot in factorization")
        self._lu = lu
        self.pivots = d
        self.n = B.shape[0]

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    def inertia(self, rtol: float = 1e-14):
        """``(negative, zero, positive)`` pivot counts."""
        tiny = rtol * np.max(np.abs(self.pivots))
        neg = int(np.count_nonzero(self.pivots < -tiny))
        zero = int(np.count_nonzero(np.abs(self.pivots) <= tiny))
        return neg, zero, self.n - neg - zero


def factor_shifted(pencil: Pencil, sigma: float, retries: int = 3, rel_step: float = 1e-9):
    """Factor ``A - sigma M``; perturb ``sigma`` if it sits on an eigenvalue.

    Returns ``(factorization, sigma_used)``.
    """
    A = pencil.A
    M = pencil.M
    last = None
    for attempt in range(retries + 1):
        s = sigma * (1.0 + attempt * rel_step) + (attempt * rel_step if sigma == 0 else 0.0)
        try:
            fac = SymmetricFactorization((A - s * M).tocsc())
        except NumericalFailure as exc:
            last = exc
            continue
        if fac.inertia()[1] == 0:
            return fac, s
        last = NumericalFailure(f"singular pivot at shift {s!r}")
    raise NumericalFailure(f"could not factor A - sigma M near sigma={sigma!r}: {last}")


def count_below(pencil: Pencil, energy: float) -> int:
    """Number of eigenvalues of the pencil strictly below ``energy``."""
    fac, _ = factor_shifted(pencil, energy)
    return fac.inertia()[0]


def residual_check(pencil_or_pair, pair=None) -> float:
    """``||A x - lambda M x|| / ||x||_M`` for an eigenpair ``(lambda, x)``.

    Accepts a :class:`Pencil` or an ``(A, M)`` tuple of matrices.
    """
    if isinstance(pencil_or_pair, Pencil):
        A, M = pencil_or_pair.A, pencil_or_pair.M
    else:
        A, M = pencil_or_pair
    lam, x = pair
    x = np.asarray(x, dtype=float)
    Mx = M @ x
    xm = np.sqrt(float(x @ Mx))
    if xm == 0:
        raise InvalidInput("zero vector")
    return float(np.linalg.norm(A @ x - lam * Mx) / xm)


@dataclass
class EigReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    shift: float
    iterations: int
    count_below_threshold: int
    threshold: float
    converged: bool = True
    vectors: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "residuals": [float(v) for v in self.residuals],
            "shift": float(self.shift),
            "iterations": int(self.iterations),
            "count_below_threshold": int(self.count_below_threshold),
            "threshold": float(self.threshold),
            "converged": bool(self.converged),
        }


def default_shift(pencil: Pencil) -> float:
    """A shift below the whole spectrum of the fibre operator."""
    from .bracket import global_lower_bound

    return min(-pencil.model.alpha ** 2, 1.05 * global_lower_bound(pencil.model))


def _refine(A, M, fac, lam, X, sweeps=3):
    """A few block inverse iterations with Rayleigh-Ritz, reusing ``fac``."""
    for _ in range(sweeps):
        Y = np.column_stack([fac.solve(M @ X[:, i]) for i in range(X.shape[1])])
        Y, _ = np.linalg.qr(Y)
        Ah = Y.T @ (A @ Y)
        Mh = Y.T @ (M @ Y)
        Ah = 0.5 * (Ah + Ah.T)
        Mh = 0.5 * (Mh + Mh.T)
        from scipy.linalg import eigh

        lam, C = eigh(Ah, Mh)
        X = Y @ C
    return lam, X


def lowest_eigs(pencil: Pencil, k: int = 8, shift: float | None = None, tol: float = DEFAULT_TOL,
                maxiter: int = 500, below: float | None = None, keep_vectors: bool = False) -> EigReport:
    """Lowest ``k`` eigenpairs by shift-invert Lanczos (ARPACK) on ``(A - shift M)^-1 M``.

    Parameters
    ----------
    pencil : Pencil
    k : int
        Number of pairs requested.
    shift : float, optional
        Must lie below the wanted eigenvalues; defaults to :func:`default_shift`.
    tol : float
        Residual bound ``||Ax - lambda Mx|| / ||x||_M`` every pair must meet.
    below : float, optional
        If given, only eigenvalues ``< below`` are reported.
    """
    if k < 1:
        raise InvalidInput("k must be >= 1")
    n = pencil.n
    k = min(k, n - 2)
    sigma = default_shift(pencil) if shift is None else float(shift)
    A = pencil.A
    M = pencil.M
    fac, sigma = factor_shifted(pencil, sigma)
    counter = [0]

    def op(b):
        counter[0] += 1
        return fac.solve(b)

    OPinv = spla.LinearOperator((n, n), matvec=op, dtype=float)
    converged = True
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        lam, X = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM", OPinv=OPinv, tol=1e-14,
                            maxiter=maxiter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        lam, X = exc.eigenvalues, exc.eigenvectors
        converged = False
        log.warning("ARPACK returned %d of %d pairs", len(lam), k)
    order = np.argsort(lam)
    lam, X = lam[order], X[:, order]
    res = np.array([residual_check((A, M), (l, X[:, i])) for i, l in enumerate(lam)])
    if len(lam) and res.max() > tol:
        lam, X = _refine(A, M, fac, lam, X)
        res = np.array([residual_check((A, M), (l, X[:, i])) for i, l in enumerate(lam)])
    # M-normalize
    X = X / np.sqrt(np.einsum("ij,i,ij->j", X, pencil.mass, X))
    threshold = pencil.model.threshold
    if below is not None:
        keep = lam < below
        lam, X, res = lam[keep], X[:, keep], res[keep]
    count = count_below(pencil, threshold)
    if len(lam) and res.max() > tol:
        converged = False
    return EigReport(lam, res, sigma, counter[0], count, threshold, converged,
                     X if keep_vectors else None)
