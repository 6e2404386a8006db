"""Dense spectra of multi-trace operators and cluster statistics."""

import cmath
import json
from dataclasses import dataclass, field

import numpy as np

from .assembly import GalerkinMatrix
from .mtf import NumericalError, operator_matrix

RADII = (0.05, 0.1, 0.2)
RESIDUAL_SAMPLES = 10
RESIDUAL_SEED = 20240531


def principal_sqrt(z):
    """Square root with argument in (-pi/2, pi/2].

    Negative reals map to ``+i sqrt(|z|)`` regardless of the sign of a
    zero imaginary part.
    """
    z = complex(z)
    z = complex(z.real, z.imag + 0.0)
    return cmath.sqrt(z)


def predicted_eigenvalues(alpha):
    """The two spectral points ``-1 + alpha +/- sqrt(1 + alpha^2)``.

    Returns
    -------
    tuple of complex
        ``(plus, minus)`` on the principal branch.
    """
    alpha = complex(alpha)
    root = principal_sqrt(1.0 + alpha * alpha)
    return (-1.0 + alpha + root, -1.0 + alpha - root)


def eig_dense(B, M, dofmap=None, check=True, seed=RESIDUAL_SEED):
    """All eigenvalues of ``inv(M) B``.

    ``inv(M) B`` is formed explicitly (block mass solves when ``dofmap`` is
    given, LU otherwise) and handed to LAPACK's nonsymmetric eigensolver.
    A residual check runs on a seeded sample of eigenpairs.

    Raises
    ------
    NumericalError
        If the eigensolver fails or a sampled residual exceeds
        ``1e-8 * ||inv(M) B||``.
    """
    Bd = B.data if isinstance(B, GalerkinMatrix) else np.asarray(B)
    Md = M.data if isinstance(M, GalerkinMatrix) else np.asarray(M)
    if dofmap is not None:
        O = operator_matrix(dofmap, Md, Bd)
    else:
        O = np.linalg.solve(Md, Bd)
    try:
        if check:
            lam, vec = np.linalg.eig(O)
        else:
            lam = np.linalg.eigvals(O)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration did not converge: {exc}") from exc
    if check:
        rng = np.random.default_rng(seed)
        n = len(lam)
        pick = rng.choice(n, size=min(RESIDUAL_SAMPLES, n), replace=False)
        scale = np.linalg.norm(O, 2) if n <= 64 else np.linalg.norm(O, "fro")
        for i in pick:
            v = vec[:, i]
            res = np.linalg.norm(O @ v - lam[i] * v) / np.linalg.norm(v)
            if res > 1e-8 * scale:
                raise NumericalError(
                    f"eigenpair residual {res:.3e} exceeds 1e-8 * ||inv(M)B|| = {1e-8 * scale:.3e}"
                )
    return lam


def two_means(eigs, iters=100):
    """Deterministic 2-means on the complex plane.

    Starts from the leftmost and rightmost eigenvalues. Returns
    ``(medoids, labels)``; a medoid is the member minimizing the summed
    distance to its cluster.
    """
    z = np.asarray(eigs, dtype=complex)
    centers = np.array([z[np.argmin(z.real)], z[np.argmax(z.real)]])
    labels = np.zeros(len(z), dtype=int)
    for _ in range(iters):
        new = np.argmin(np.abs(z[:, None] - centers[None, :]), axis=1)
        if _ and np.array_equal(new, labels):
            break
        labels = new
        for c in range(2):
            if np.any(labels == c):
                centers[c] = z[labels == c].mean()
    medoids = []
    for c in range(2):
        members = z[labels == c]
        if len(members) == 0:
            medoids.append(complex(np.nan, np.nan))
            continue
        cost = np.abs(members[:, None] - members[None, :]).sum(axis=1)
        medoids.append(complex(members[np.argmin(cost)]))
    return medoids, labels


@dataclass
class SpectrumReport:
    """Spectrum with distances to the predicted pair and summary statistics."""

    eigenvalues: np.ndarray
    alpha: complex
    predicted: tuple
    distances: np.ndarray
    nearest: np.ndarray
    median: float
    p90: float
    max: float
    fractions: dict
    medoids: list
    meta: dict = field(default_factory=dict)

    def positive_cluster_p90(self):
        """90th-percentile distance to the first predicted point, over the
        eigenvalues nearest to it."""
        sel = self.nearest == 0
        if not np.any(sel):
            return float("inf")
        return float(np.percentile(self.distances[sel], 90))

    def to_json(self):
        c = lambda z: {"re": float(np.real(z)), "im": float(np.imag(z))}  # noqa: E731
        return {
            "alpha": c(self.alpha),
            "predicted": [c(p) for p in self.predicted],
            "count": int(len(self.eigenvalues)),
            "median_distance": self.median,
            "p90_distance": self.p90,
            "max_distance": self.max,
            "positive_cluster_p90": self.positive_cluster_p90(),
            "fraction_within": {f"{r:g}": v for r, v in self.fractions.items()},
            "medoids": [c(m) for m in self.medoids],
            "meta": self.meta,
        }


def cluster_report(eigs, alpha, meta=None, radii=RADII):
    """Distances of eigenvalues to the predicted pair for ``alpha``."""
    z = np.asarray(eigs, dtype=complex)
    pred = predicted_eigenvalues(alpha)
    d = np.abs(z[:, None] - np.array(pred)[None, :])
    nearest = np.argmin(d, axis=1)
    dist = d[np.arange(len(z)), nearest]
    medoids, _ = two_means(z)
    return SpectrumReport(
        eigenvalues=z,
        alpha=complex(alpha),
        predicted=pred,
        distances=dist,
        nearest=nearest,
        median=float(np.median(dist)),
        p90=float(np.percentile(dist, 90)),
        max=float(np.max(dist)),
        fractions={r: float(np.mean(dist <= r)) for r in radii},
        medoids=medoids,
        meta=dict(meta or {}),
    )


def write_eigs_csv(path, eigs):
    """CSV with header ``re,im`` and shortest round-trip float64 text."""
    lines = ["re,im"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in np.asarray(eigs, dtype=complex)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_eigs_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0] + 1j * data[:, 1]


def write_report_json(path, report):
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
