"""Transmission operator, relaxed local multi-trace system and solvers.

The discrete transmission operator ``P`` swaps the two copies of the traces
on every interface, keeping the Dirichlet sign and flipping the Neumann sign.
The relaxed local multi-trace system is ``B_h = B_A - (1 - alpha) M - alpha M P``,
whose operator form is ``inv(M) B_h = O_A - (1 - alpha) I - alpha P``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import GalerkinMatrix, eval_potential, plane_wave_traces


class NumericalError(RuntimeError):
    """Singular system, solver breakdown or failed residual check."""


# ------------------------------------------------------- transmission


@dataclass(frozen=True, eq=False)
class TransmissionPermutation:
    """Signed permutation ``(P v)[i] = sign[i] * v[perm[i]]``."""

    perm: np.ndarray
    sign: np.ndarray

    @property
    def dim(self):
        return len(self.perm)

    def apply(self, v):
        return self.sign.reshape((-1,) + (1,) * (np.ndim(v) - 1)) * np.asarray(v)[self.perm]

    def dense(self):
        P = np.zeros((self.dim, self.dim), dtype=np.int8)
        P[np.arange(self.dim), self.perm] = self.sign
        return P

    def right_multiply(self, A):
        """``A @ P`` without forming ``P``."""
        out = np.zeros_like(A)
        out[:, self.perm] = A * self.sign[None, :]
        return out


def build_transmission(dofmap):
    """Transmission permutation from the interface node correspondence."""
    n = dofmap.dim
    perm = np.full(n, -1, dtype=np.intp)
    sign = np.zeros(n, dtype=np.int8)
    for j, lj, k, lk in dofmap.correspondence:
        dj, nj = dofmap.dirichlet(j).start, dofmap.neumann(j).start
        dk, nk = dofmap.dirichlet(k).start, dofmap.neumann(k).start
        for src, dst, s in (
            (dj + lj, dk + lk, 1),
            (dk + lk, dj + lj, 1),
            (nj + lj, nk + lk, -1),
            (nk + lk, nj + lj, -1),
        ):
            perm[src] = dst
            sign[src] = s
    if np.any(perm < 0):
        raise ValueError("incomplete interface correspondence: some traces have no partner")
    return TransmissionPermutation(perm, sign)


# ------------------------------------------------------------- system


def inverse_duality_apply(dofmap, M, X):
    """``inv(M) @ X`` using the per-subdomain mass blocks.

    With ``M_j = [[0, m], [-m, 0]]`` the inverse is ``[[0, -inv(m)], [inv(m), 0]]``.
    """
    Md = M.data if isinstance(M, GalerkinMatrix) else M
    X = np.asarray(X)
    out = np.empty(X.shape, dtype=np.result_type(X, float))
    for j in range(dofmap.n_subdomains):
        d, n = dofmap.dirichlet(j), dofmap.neumann(j)
        cho = sla.cho_factor(Md[d, n])
        out[d] = -sla.cho_solve(cho, X[n])
        out[n] = sla.cho_solve(cho, X[d])
    return out


def operator_matrix(dofmap, M, B):
    """Operator form ``inv(M) @ B``."""
    Bd = B.data if isinstance(B, GalerkinMatrix) else B
    return inverse_duality_apply(dofmap, M, Bd)


@dataclass(frozen=True, eq=False)
class MtfSystem:
    """Relaxed local multi-trace system."""

    B: GalerkinMatrix
    M: GalerkinMatrix
    P: TransmissionPermutation
    alpha: complex
    B_A: GalerkinMatrix
    rhs: np.ndarray = None
    meta: dict = field(default_factory=dict)


def assemble_mtf(B_A, M, P, alpha, rhs=None, meta=None):
    """``B_h = B_A - (1 - alpha) M - alpha M P`` (role "L_ALPHA")."""
    if B_A.shape != M.shape or B_A.shape[0] != P.dim:
        raise ValueError("dimension mismatch between B_A, M and P")
    alpha = complex(alpha)
    MP = P.right_multiply(M.data)
    B = B_A.data - (1.0 - alpha) * M.data - alpha * MP
    return MtfSystem(GalerkinMatrix(B, "L_ALPHA"), M, P, alpha, B_A, rhs, dict(meta or {}))


def transmission_pairing(M, P):
    """Pairing matrix ``M P`` of the transmission operator (role "PI")."""
    return GalerkinMatrix(P.right_multiply(M.data), "PI")


def split_diag(B_A, dofmap):
    """Split ``B_A`` into same-interface blocks ``B_D`` and the rest ``B_T``."""
    B = B_A.data
    keep = np.zeros(B.shape, dtype=bool)
    for j in range(dofmap.n_subdomains):
        curve = dofmap.node_curve[j]
        idx = np.r_[np.arange(dofmap.dirichlet(j).start, dofmap.dirichlet(j).stop),
                    np.arange(dofmap.neumann(j).start, dofmap.neumann(j).stop)]
        tag = np.r_[curve, curve]
        keep[np.ix_(idx, idx)] = tag[:, None] == tag[None, :]
    B_D = np.where(keep, B, 0.0)
    return GalerkinMatrix(B_D, "A_DIAG"), GalerkinMatrix(B - B_D, "A_OFF")


def incident_traces(disc, direction, kappa0=None, amplitude=1.0):
    """Multi-trace vector ``(gamma_0 u_inc, 0, ..., 0)`` of a plane wave."""
    kappa0 = disc.kappas[0] if kappa0 is None else kappa0
    u, p = plane_wave_traces(disc, 0, direction, kappa0, amplitude)
    vec = np.zeros(disc.dofmap.dim, dtype=complex)
    vec[disc.dofmap.dirichlet(0)] = u
    vec[disc.dofmap.neumann(0)] = p
    return vec


def assemble_rhs(disc, B_A, M, direction=(1.0, 0.0), kappa0=None, amplitude=1.0):
    """Right-hand side ``(B_A - M) u_inc`` for an incident plane wave."""
    uinc = incident_traces(disc, direction, kappa0, amplitude)
    return B_A.data @ uinc - M.data @ uinc


# -------------------------------------------------------------- solve


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    """Solved multi-trace coefficients and field reconstruction."""

    coeffs: np.ndarray
    disc: object
    residual: float
    method: str
    iterations: int = 0
    history: tuple = ()
    incident: dict = None
    alpha: complex = 1.0

    def subdomain_of(self, point):
        """Index of the subdomain containing ``point`` (0 if outside all curves)."""
        part = self.disc.partition
        j = 0
        depth = -1
        for f in part.interfaces:
            if f.curve.contains(point):
                d = self.disc.tree.depth(f.inner)
                if d > depth:
                    j, depth = f.inner, d
        return j

    def field(self, points):
        """Total field at points away from the skeleton."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dm = self.disc.dofmap
        parts = dm.split(self.coeffs)
        out = np.empty(len(pts), dtype=complex)
        inc = self.incident
        uinc = None
        if inc is not None:
            uinc = incident_traces(self.disc, inc["direction"], inc["kappa0"], inc["amplitude"])
        for i, x in enumerate(pts):
            j = self.subdomain_of(x)
            u, p = parts[j]
            if j == 0 and uinc is not None:
                d = np.asarray(inc["direction"], dtype=float)
                u = u - uinc[dm.dirichlet(0)]
                p = p - uinc[dm.neumann(0)]
                base = inc["amplitude"] * np.exp(1j * inc["kappa0"] * float(x @ d))
            else:
                base = 0.0
            out[i] = base + eval_potential(self.disc, j, u, p, x[None, :])[0]
        return out

    def to_json(self, geometry_id=None):
        dm = self.disc.dofmap
        blocks = []
        for j, (u, p) in enumerate(dm.split(self.coeffs)):
            blocks.append(
                {
                    "subdomain": j,
                    "dirichlet": {"re": u.real.tolist(), "im": u.imag.tolist()},
                    "neumann": {"re": p.real.tolist(), "im": p.imag.tolist()},
                }
            )
        return {
            "alpha": {"re": self.alpha.real, "im": self.alpha.imag},
            "kappa": list(self.disc.kappas),
            "h": self.disc.h,
            "geometry": geometry_id or self.disc.partition.name,
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "blocks": blocks,
        }

    def write_json(self, path, geometry_id=None):
        with open(path, "w") as fh:
            json.dump(self.to_json(geometry_id), fh, indent=1)


def solve(system, disc, method="direct", tol=1e-8, maxit=None, incident=None):
    """Solve ``B_h x = rhs``.

    Parameters
    ----------
    system : MtfSystem
        Must carry a right-hand side.
    disc : Discretization
    method : {"direct", "gmres"}
        LU with partial pivoting, or unrestarted GMRES on the operator form
        ``inv(M) B_h``.
    tol : float
        GMRES relative tolerance.
    maxit : int, optional
        GMRES iteration cap; defaults to the dimension.
    incident : dict, optional
        ``{"direction", "kappa0", "amplitude"}`` used for field evaluation.

    Returns
    -------
    ScatteringSolution

    Raises
    ------
    NumericalError
        Singular matrix, residual check failure or GMRES non-convergence.
    """
    if system.rhs is None:
        raise ValueError("the system has no right-hand side")
    if system.alpha == 0:
        raise NumericalError("alpha = 0: the relaxed system is not invertible")
    B = system.B.data
    b = system.rhs
    n = B.shape[0]
    if method == "direct":
        try:
            lu = sla.lu_factor(B, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"LU factorization failed: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0):
            raise NumericalError("singular matrix (zero pivot)")
        x = sla.lu_solve(lu, b)
        res = float(np.linalg.norm(B @ x - b) / np.linalg.norm(b))
        if not res < 1e-10:
            raise NumericalError(f"direct solve residual {res:.3e} exceeds 1e-10")
        return ScatteringSolution(x, disc, res, "direct", incident=incident, alpha=system.alpha)
    if method == "gmres":
        maxit = n if maxit is None else int(maxit)
        O = operator_matrix(disc.dofmap, system.M, B)
        rhs = inverse_duality_apply(disc.dofmap, system.M, b)
        history = []
        x, info = spla.gmres(
            O,
            rhs,
            rtol=tol,
            atol=0.0,
            restart=maxit,
            maxiter=1,
            callback=lambda r: history.append(float(r)),
            callback_type="pr_norm",
        )
        if info != 0:
            raise NumericalError(f"GMRES did not converge within {maxit} iterations")
        res = float(np.linalg.norm(B @ x - b) / np.linalg.norm(b))
        return ScatteringSolution(
            x, disc, res, "gmres", len(history), tuple(history), incident, system.alpha
        )
    raise ValueError(f"unknown solve method {method!r}")
