"""Spline bases and their roughness penalties.

Smooth terms are built from three basis types:

* ``cr``: natural cubic regression splines in one covariate, in the
  cardinal parameterization where each coefficient is the value of the
  spline at a knot.  Writing gamma for the vector of second derivatives
  at the interior knots, natural end conditions give B gamma = D beta
  with banded B and D assembled from the knot spacings, so the
  roughness penalty  integral f''(x)^2 dx  equals beta' D' B^-1 D beta.
* ``cc``: cyclic cubic splines, the same construction with the last
  knot identified with the first so value, slope and curvature match
  across the wrap point.
* ``tp``: thin plate regression splines in two covariates, using the
  radial kernel eta(r) = r^2 log(r) / (8 pi), rank-reduced by keeping
  the leading eigenvectors of the kernel matrix.

Tensor products combine two univariate bases by row-wise Kronecker
products, with one penalty per margin.

Each basis is frozen at construction: evaluating at new covariate
values reuses stored knots or kernel centers, so prediction is exact
for the fitted model.
"""

import numpy as np
from scipy import linalg


def default_knots(x, k):
    """Place k knots at evenly spaced quantiles of the unique values."""
    ux = np.unique(np.asarray(x, dtype=float))
    if len(ux) < k:
        raise ValueError(
            f"basis needs at least k={k} distinct covariate values, "
            f"got {len(ux)}")
    knots = np.quantile(ux, np.linspace(0.0, 1.0, k))
    knots = np.unique(knots)
    if len(knots) < k:
        raise ValueError("quantile knots are not distinct; reduce k")
    return knots


def _natural_spline_matrices(h):
    """Banded B ((k-2)x(k-2)) and D ((k-2)xk) from knot spacings h."""
    k = len(h) + 1
    B = np.zeros((k - 2, k - 2))
    D = np.zeros((k - 2, k))
    for i in range(k - 2):
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            B[i, i + 1] = h[i + 1] / 6.0
            B[i + 1, i] = h[i + 1] / 6.0
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
    return B, D


class CRBasis:
    """Natural cubic regression spline basis with knot-value coefficients."""

    kind = "cr"

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if len(knots) < 3:
            raise ValueError("cr basis needs at least 3 knots")
        if np.any(np.diff(knots) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        self.knots = knots
        self.ncoef = len(knots)
        B, D = _natural_spline_matrices(np.diff(knots))
        self._F = linalg.solve(B, D, assume_a="pos")
        self._S = D.T @ self._F
        self._S = 0.5 * (self._S + self._S.T)

    @classmethod
    def from_data(cls, x, k=10):
        return cls(default_knots(x, k))

    def penalties(self):
        return [self._S]

    def design(self, x):
        x = np.asarray(x, dtype=float)
        kn = self.knots
        k = self.ncoef
        # Second derivatives at all knots: gamma = Fp beta, with zero
        # curvature at the boundary knots (natural conditions).
        Fp = np.zeros((k, k))
        Fp[1:-1] = self._F
        X = np.zeros((len(x), k))
        j = np.clip(np.searchsorted(kn, x, side="right") - 1, 0, k - 2)
        inside = (x >= kn[0]) & (x <= kn[-1])

        xi_ = x[inside]
        ji = j[inside]
        h = kn[ji + 1] - kn[ji]
        dm = kn[ji + 1] - xi_
        dp = xi_ - kn[ji]
        am = dm / h
        ap = dp / h
        cm = (dm ** 3 / h - h * dm) / 6.0
        cp = (dp ** 3 / h - h * dp) / 6.0
        rows = np.nonzero(inside)[0]
        X[rows, ji] += am
        X[rows, ji + 1] += ap
        X[rows] += cm[:, None] * Fp[ji] + cp[:, None] * Fp[ji + 1]

        # Beyond the boundary knots the spline continues linearly.
        lo = x < kn[0]
        if np.any(lo):
            h0 = kn[1] - kn[0]
            d0 = np.zeros(k)
            d0[0] = -1.0 / h0
            d0[1] = 1.0 / h0
            d0 -= (h0 / 6.0) * Fp[1]
            X[lo, 0] = 1.0
            X[lo] += (x[lo] - kn[0])[:, None] * d0
        hi = x > kn[-1]
        if np.any(hi):
            h1 = kn[-1] - kn[-2]
            d1 = np.zeros(k)
            d1[-2] = -1.0 / h1
            d1[-1] = 1.0 / h1
            d1 += (h1 / 6.0) * Fp[-2]
            X[hi, -1] = 1.0
            X[hi] += (x[hi] - kn[-1])[:, None] * d1
        return X

    def to_dict(self):
        return {"kind": self.kind, "knots": self.knots.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["knots"]))


class CCBasis:
    """Cyclic cubic spline basis; the last knot is identified with the
    first, so there are k-1 coefficients for k knots and the fitted
    function is periodic with period knots[-1] - knots[0]."""

    kind = "cc"

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if len(knots) < 4:
            raise ValueError("cc basis needs at least 4 knots")
        if np.any(np.diff(knots) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        self.knots = knots
        m = len(knots) - 1
        self.ncoef = m
        h = np.diff(knots)
        B = np.zeros((m, m))
        D = np.zeros((m, m))
        for i in range(m):
            ip = (i + 1) % m
            im = (i - 1) % m
            B[i, i] += (h[im] + h[i]) / 3.0
            B[i, ip] += h[i] / 6.0
            B[i, im] += h[im] / 6.0
            D[i, i] += -1.0 / h[i] - 1.0 / h[im]
            D[i, ip] += 1.0 / h[i]
            D[i, im] += 1.0 / h[im]
        self._F = linalg.solve(B, D)
        self._S = D.T @ self._F
        self._S = 0.5 * (self._S + self._S.T)

    @classmethod
    def from_data(cls, x, k=10, period=None):
        x = np.asarray(x, dtype=float)
        if period is not None:
            lo = float(np.min(x))
            knots = np.linspace(lo, lo + period, k)
        else:
            ux = np.unique(x)
            if len(ux) < k:
                raise ValueError(
                    f"cc basis needs at least k={k} distinct values")
            knots = np.quantile(ux, np.linspace(0.0, 1.0, k))
            knots = np.unique(knots)
            if len(knots) < k:
                raise ValueError("quantile knots are not distinct")
        return cls(knots)

    def penalties(self):
        return [self._S]

    def design(self, x):
        x = np.asarray(x, dtype=float)
        kn = self.knots
        m = self.ncoef
        period = kn[-1] - kn[0]
        xw = kn[0] + np.mod(x - kn[0], period)
        j = np.clip(np.searchsorted(kn, xw, side="right") - 1, 0, m - 1)
        h = kn[j + 1] - kn[j]
        dm = kn[j + 1] - xw
        dp = xw - kn[j]
        am = dm / h
        ap = dp / h
        cm = (dm ** 3 / h - h * dm) / 6.0
        cp = (dp ** 3 / h - h * dp) / 6.0
        X = np.zeros((len(x), m))
        rows = np.arange(len(x))
        jp = (j + 1) % m
        np.add.at(X, (rows, j), am)
        np.add.at(X, (rows, jp), ap)
        X += cm[:, None] * self._F[j] + cp[:, None] * self._F[jp]
        return X

    def to_dict(self):
        return {"kind": self.kind, "knots": self.knots.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["knots"]))


def _tps_kernel(r):
    out = np.zeros_like(r)
    pos = r > 0.0
    out[pos] = r[pos] ** 2 * np.log(r[pos]) / (8.0 * np.pi)
    return out


class TPBasis:
    """Rank-reduced thin plate regression spline in two covariates.

    The full thin plate spline over M kernel centers is truncated to
    the k eigenvectors of the kernel matrix with largest absolute
    eigenvalue; the affine null space (1, x1, x2) is appended as
    unpenalized columns, and the orthogonality constraint between the
    two parts is absorbed so the basis has exactly k columns.
    """

    kind = "tp"

    def __init__(self, centers, k, UZ=None, penalty=None):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim != 2 or centers.shape[1] != 2:
            raise ValueError("tp basis needs two covariates")
        M = len(centers)
        if k < 4:
            raise ValueError("tp basis needs k >= 4")
        if k > M:
            raise ValueError(f"tp basis k={k} exceeds {M} distinct points")
        self.centers = centers
        self.k = int(k)
        self.ncoef = int(k)
        if UZ is not None:
            self._UZ = np.asarray(UZ, dtype=float)
            self._S = np.asarray(penalty, dtype=float)
            return
        E = _tps_kernel(np.sqrt(
            ((centers[:, None, :] - centers[None, :, :]) ** 2).sum(-1)))
        vals, vecs = linalg.eigh(E)
        keep = np.argsort(np.abs(vals))[::-1][:k]
        Dk = vals[keep]
        Uk = vecs[:, keep]
        T = np.column_stack([np.ones(M), centers[:, 0], centers[:, 1]])
        # delta = Uk @ dt must satisfy T' delta = 0
        Z = linalg.null_space(T.T @ Uk)
        self._UZ = Uk @ Z
        Sq = Z.T @ (Dk[:, None] * Z)
        Sq = 0.5 * (Sq + Sq.T)
        # Truncation can leave tiny negative eigenvalues; clip them so
        # the penalty is positive semi-definite.
        w, V = linalg.eigh(Sq)
        w = np.maximum(w, 0.0)
        Sq = (V * w) @ V.T
        S = np.zeros((k, k))
        S[:k - 3, :k - 3] = 0.5 * (Sq + Sq.T)
        self._S = S

    @classmethod
    def from_data(cls, x1, x2, k=30, maxspline=2000):
        pts = np.column_stack([np.asarray(x1, dtype=float),
                               np.asarray(x2, dtype=float)])
        centers = np.unique(pts, axis=0)
        if len(centers) > maxspline:
            # Deterministic thinning: evenly spaced picks from the
            # lexicographically sorted unique points.
            idx = np.linspace(0, len(centers) - 1, maxspline).round()
            centers = centers[idx.astype(int)]
        return cls(centers, k)

    def penalties(self):
        return [self._S]

    def design(self, x1, x2):
        pts = np.column_stack([np.asarray(x1, dtype=float),
                               np.asarray(x2, dtype=float)])
        r = np.sqrt(((pts[:, None, :] - self.centers[None, :, :]) ** 2)
                    .sum(-1))
        Xs = _tps_kernel(r) @ self._UZ
        return np.column_stack([Xs, np.ones(len(pts)), pts[:, 0], pts[:, 1]])

    def to_dict(self):
        return {"kind": self.kind, "centers": self.centers.tolist(),
                "k": self.k, "UZ": self._UZ.tolist(),
                "penalty": self._S.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["centers"]), d["k"],
                   UZ=np.asarray(d["UZ"]), penalty=np.asarray(d["penalty"]))


class TensorBasis:
    """Tensor product of two univariate bases via row-wise Kronecker
    products.  Coefficients are ordered with the first margin slowest.
    Each margin contributes one penalty: S1 (x) I and I (x) S2."""

    kind = "te"

    def __init__(self, margin1, margin2):
        self.margins = (margin1, margin2)
        self.ncoef = margin1.ncoef * margin2.ncoef

    def penalties(self):
        k1 = self.margins[0].ncoef
        k2 = self.margins[1].ncoef
        S1 = self.margins[0].penalties()[0]
        S2 = self.margins[1].penalties()[0]
        return [np.kron(S1, np.eye(k2)), np.kron(np.eye(k1), S2)]

    def design(self, x1, x2):
        X1 = self.margins[0].design(x1)
        X2 = self.margins[1].design(x2)
        n = X1.shape[0]
        return (X1[:, :, None] * X2[:, None, :]).reshape(n, self.ncoef)

    def to_dict(self):
        return {"kind": self.kind,
                "margins": [m.to_dict() for m in self.margins]}

    @classmethod
    def from_dict(cls, d):
        return cls(*(basis_from_dict(m) for m in d["margins"]))


_BASIS_KINDS = {"cr": CRBasis, "cc": CCBasis, "tp": TPBasis,
                "te": TensorBasis}


def basis_from_dict(d):
    return _BASIS_KINDS[d["kind"]].from_dict(d)
