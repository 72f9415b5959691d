"""Response families for extreme value regression.

Each family works on the scale of its linked parameters: real-line
parameters (location, shape) use an identity link, positive parameters
(scale) a log link.  A family reports, per observation, the log density
together with its first and second derivatives with respect to the
linked parameter vector.  The fitting code never differentiates a
density itself; everything analytic lives here.

The generalized extreme value and generalized Pareto densities share a
common kernel.  With z the standardized residual and t = 1 + xi*z the
support factor, both densities are built from

    P(z, xi) = (1 + 1/xi) * log(t)        (log-density term)
    Q(z, xi) = -log(t) / xi               (so t^(-1/xi) = exp(Q))

and their partial derivatives in (z, xi).  Near xi = 0 both switch to
first-order series expansions so gradients stay accurate enough for the
Newton solver to converge through the Gumbel/exponential boundary.
"""

import numpy as np
from scipy import special
from scipy.stats import norm

# Width of the xi ~ 0 band where the Gumbel/exponential series kernels
# take over from the exact expressions.
XI_TOL = 1e-6

EULER_GAMMA = 0.57721566490153286


def _as2d(eta):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        eta = eta[:, None]
    return eta


class PQ:
    """Kernel values P, Q and partials in (z, xi), vectorized."""

    __slots__ = ("t", "P", "Pz", "Pxi", "Pzz", "Pzxi", "Pxixi",
                 "Q", "Qz", "Qxi", "Qzz", "Qzxi", "Qxixi", "ok")

    def __init__(self, z, xi):
        z = np.asarray(z, dtype=float)
        xi = np.broadcast_to(np.asarray(xi, dtype=float), z.shape)
        t = 1.0 + xi * z
        self.ok = t > 0.0
        # Work on clamped t so masked-out entries never propagate nan.
        t = np.where(self.ok, t, 1.0)
        self.t = t
        ser = np.abs(xi) < XI_TOL
        # xs is safe to divide by; series results overwrite these entries.
        xs = np.where(ser, 1.0, xi)
        L = np.log1p(np.where(self.ok, xi * z, 0.0))

        z2 = z * z
        z3 = z2 * z
        z4 = z3 * z

        self.P = np.where(ser, z + xi * (z - 0.5 * z2),
                          (1.0 + 1.0 / xs) * L)
        self.Pz = np.where(ser, 1.0 + xi * (1.0 - z), (1.0 + xs) / t)
        self.Pxi = np.where(ser,
                            (z - 0.5 * z2) + xi * (2.0 * z3 / 3.0 - z2),
                            -L / xs ** 2 + (1.0 + 1.0 / xs) * z / t)
        self.Pzz = np.where(ser, -xi, -xs * (1.0 + xs) / t ** 2)
        self.Pzxi = np.where(ser, (1.0 - z) * (1.0 - 2.0 * xi * z),
                             (1.0 - z) / t ** 2)
        self.Pxixi = np.where(
            ser,
            (2.0 * z3 / 3.0 - z2) + xi * (2.0 * z3 - 1.5 * z4),
            2.0 * L / xs ** 3 - 2.0 * z / (xs ** 2 * t)
            - (1.0 + 1.0 / xs) * z2 / t ** 2)

        self.Q = np.where(ser, -z + 0.5 * xi * z2, -L / xs)
        # Qz and its partials have no xi -> 0 singularity.
        self.Qz = -1.0 / t
        self.Qzz = xi / t ** 2
        self.Qzxi = z / t ** 2
        self.Qxi = np.where(ser, 0.5 * z2 - 2.0 * xi * z3 / 3.0,
                            L / xs ** 2 - z / (xs * t))
        self.Qxixi = np.where(ser, -2.0 * z3 / 3.0 + 1.5 * xi * z4,
                              2.0 * z / (xs ** 2 * t) - 2.0 * L / xs ** 3
                              + z2 / (xs * t ** 2))


def _chain3(kq, z, sinv):
    """Partials of Q(z(mu,b), xi) for z = (y - mu)*sinv, sinv = exp(-b).

    Returns first derivatives (n, 3) and second derivatives (n, 3, 3)
    in the order (mu, b, xi).
    """
    zmu = -sinv
    zb = -z
    g = np.stack([kq.Qz * zmu, kq.Qz * zb, kq.Qxi], axis=-1)
    h = np.empty(z.shape + (3, 3))
    h[..., 0, 0] = kq.Qzz * zmu * zmu
    h[..., 0, 1] = kq.Qzz * zmu * zb + kq.Qz * sinv
    h[..., 0, 2] = kq.Qzxi * zmu
    h[..., 1, 1] = kq.Qzz * zb * zb + kq.Qz * z
    h[..., 1, 2] = kq.Qzxi * zb
    h[..., 2, 2] = kq.Qxixi
    h[..., 1, 0] = h[..., 0, 1]
    h[..., 2, 0] = h[..., 0, 2]
    h[..., 2, 1] = h[..., 1, 2]
    return g, h


def _chain2(kq, z):
    """Partials of Q(z(b), xi) for z = y*exp(-b), order (b, xi)."""
    zb = -z
    g = np.stack([kq.Qz * zb, kq.Qxi], axis=-1)
    h = np.empty(z.shape + (2, 2))
    h[..., 0, 0] = kq.Qzz * zb * zb + kq.Qz * z
    h[..., 0, 1] = kq.Qzxi * zb
    h[..., 1, 1] = kq.Qxixi
    h[..., 1, 0] = h[..., 0, 1]
    return g, h


def _interval_parts(d):
    """Weights for log(F(hi) - F(lo)) given d = A_lo - A_hi > 0.

    F = exp(-A) at both endpoints; returns (logG_offset, r_hi, r_lo)
    with log G = -A_hi + logG_offset, and the gradient weights
    r_hi = F_hi/G, r_lo = F_lo/G, which depend on d alone.
    """
    em = -special.expm1(-d)      # 1 - exp(-d), stable for small d
    off = np.log(em)
    r_hi = 1.0 / em
    r_lo = r_hi - 1.0
    return off, r_hi, r_lo


class GevFamily:
    """Generalized extreme value density on (location, log scale, shape)."""

    name = "gev"
    nparam = 3
    param_names = ("location", "logscale", "shape")
    links = ("identity", "log", "identity")
    supports_censoring = True

    def initial_values(self, y):
        sd = float(np.std(y))
        if sd <= 0.0:
            sd = 1.0
        psi0 = sd * np.sqrt(6.0) / np.pi
        mu0 = float(np.mean(y)) - EULER_GAMMA * psi0
        return np.array([mu0, np.log(psi0), 0.05])

    def point_terms(self, y, eta):
        eta = _as2d(eta)
        mu, b, xi = eta[:, 0], eta[:, 1], eta[:, 2]
        sinv = np.exp(-b)
        z = (y - mu) * sinv
        kq = PQ(z, xi)
        w = np.exp(kq.Q)
        ll = -b - kq.P - w
        qg, qh = _chain3(kq, z, sinv)

        zmu = -sinv
        zb = -z
        g = np.empty_like(eta)
        g[:, 0] = -kq.Pz * zmu - w * qg[:, 0]
        g[:, 1] = -1.0 - kq.Pz * zb - w * qg[:, 1]
        g[:, 2] = -kq.Pxi - w * qg[:, 2]

        h = np.empty(eta.shape + (3,))
        # -P part
        h[:, 0, 0] = -kq.Pzz * zmu * zmu
        h[:, 0, 1] = -kq.Pzz * zmu * zb - kq.Pz * sinv
        h[:, 0, 2] = -kq.Pzxi * zmu
        h[:, 1, 1] = -kq.Pzz * zb * zb - kq.Pz * z
        h[:, 1, 2] = -kq.Pzxi * zb
        h[:, 2, 2] = -kq.Pxixi
        # -w part: w_ab = w*(q_a q_b + q_ab)
        for a in range(3):
            for c in range(a, 3):
                h[:, a, c] -= w * (qg[:, a] * qg[:, c] + qh[:, a, c])
        h[:, 1, 0] = h[:, 0, 1]
        h[:, 2, 0] = h[:, 0, 2]
        h[:, 2, 1] = h[:, 1, 2]
        return ll, g, h, kq.ok

    def interval_terms(self, lo, hi, eta):
        """log[F(hi) - F(lo)] and derivatives; rows with lo == hi fall
        back to the point density."""
        eta = _as2d(eta)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        exact = hi <= lo
        ll, g, h, ok = self.point_terms(np.where(exact, lo, hi), eta)
        if np.all(exact):
            return ll, g, h, ok

        mu, b, xi = eta[:, 0], eta[:, 1], eta[:, 2]
        sinv = np.exp(-b)

        def endpoint(yv):
            z = (yv - mu) * sinv
            kq = PQ(z, xi)
            A = np.exp(kq.Q)
            qg, qh = _chain3(kq, z, sinv)
            # Below support with xi > 0: F = 0, i.e. A = +inf.  Above
            # support with xi < 0: F = 1, A = 0 and all partials vanish.
            bad = ~kq.ok
            fzero = bad & (xi > 0.0)
            fone = bad & (xi <= 0.0)
            A = np.where(fzero, np.inf, np.where(fone, 0.0, A))
            qg = np.where(fone[:, None], 0.0, qg)
            qh = np.where(fone[:, None, None], 0.0, qh)
            return A, qg, qh, fzero

        A_hi, qg_hi, qh_hi, hi_zero = endpoint(hi)
        A_lo, qg_lo, qh_lo, _ = endpoint(lo)

        d = A_lo - A_hi
        cen_ok = d > 0.0
        d = np.where(cen_ok, d, 1.0)
        off, r_hi, r_lo = _interval_parts(d)
        # F_hi = 0 forces the whole interval mass to zero.
        cen_ok &= ~hi_zero

        ll_c = -A_hi + off
        # dA/da = A * q_a; r_lo multiplies A_lo terms.  Where A = inf the
        # weight r is 0 (exp(-d) underflow), and A*qg may be inf*0: mask.
        wlo = r_lo * A_lo
        wlo = np.where(np.isfinite(wlo), wlo, 0.0)
        whi = r_hi * A_hi
        g_c = wlo[:, None] * qg_lo - whi[:, None] * qg_hi
        h_c = np.empty(eta.shape + (3,))
        for a in range(3):
            for c in range(a, 3):
                t_hi = whi * (qg_hi[:, a] * qg_hi[:, c] + qh_hi[:, a, c]) \
                    - whi * A_hi * qg_hi[:, a] * qg_hi[:, c]
                t_lo = wlo * (qg_lo[:, a] * qg_lo[:, c] + qh_lo[:, a, c]) \
                    - wlo * A_lo * qg_lo[:, a] * qg_lo[:, c]
                t_lo = np.where(np.isfinite(t_lo), t_lo, 0.0)
                h_c[:, a, c] = (t_lo - t_hi) - g_c[:, a] * g_c[:, c]
        h_c[:, 1, 0] = h_c[:, 0, 1]
        h_c[:, 2, 0] = h_c[:, 0, 2]
        h_c[:, 2, 1] = h_c[:, 1, 2]

        use = ~exact
        ll = np.where(use, np.where(cen_ok, ll_c, -np.inf), ll)
        g = np.where(use[:, None], g_c, g)
        h = np.where(use[:, None, None], h_c, h)
        ok = np.where(use, cen_ok, ok)
        return ll, g, h, ok

    def theta(self, eta):
        eta = _as2d(eta)
        return eta[:, 0], np.exp(eta[:, 1]), eta[:, 2]

    def cdf(self, y, eta):
        mu, psi, xi = self.theta(eta)
        return np.exp(gev_logcdf(y, mu, psi, xi))

    def quantile(self, p, eta):
        mu, psi, xi = self.theta(eta)
        return gev_quantile(p, mu, psi, xi)

    def rvs(self, eta, rng):
        mu, psi, xi = self.theta(eta)
        u = rng.uniform(size=np.broadcast(mu, psi, xi).shape)
        return gev_quantile(u, mu, psi, xi)


class GpdFamily:
    """Generalized Pareto density for threshold excesses, on
    (log scale, shape).  Responses must be positive excesses."""

    name = "gpd"
    nparam = 2
    param_names = ("logscale", "shape")
    links = ("log", "identity")
    supports_censoring = True

    def initial_values(self, y):
        m = float(np.mean(y))
        if m <= 0.0:
            m = 1.0
        return np.array([np.log(m), 0.05])

    def point_terms(self, y, eta):
        eta = _as2d(eta)
        b, xi = eta[:, 0], eta[:, 1]
        z = y * np.exp(-b)
        kq = PQ(z, xi)
        ll = -b - kq.P
        zb = -z
        g = np.empty_like(eta)
        g[:, 0] = -1.0 - kq.Pz * zb
        g[:, 1] = -kq.Pxi
        h = np.empty(eta.shape + (2,))
        h[:, 0, 0] = -kq.Pzz * zb * zb - kq.Pz * z
        h[:, 0, 1] = -kq.Pzxi * zb
        h[:, 1, 1] = -kq.Pxixi
        h[:, 1, 0] = h[:, 0, 1]
        ok = kq.ok & (y > 0.0)
        return ll, g, h, ok

    def interval_terms(self, lo, hi, eta):
        eta = _as2d(eta)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        exact = hi <= lo
        ll, g, h, ok = self.point_terms(np.where(exact, lo, hi), eta)
        if np.all(exact):
            return ll, g, h, ok

        b, xi = eta[:, 0], eta[:, 1]
        sinv = np.exp(-b)

        def endpoint(yv):
            # Survival S = exp(Q); negative excesses mean S = 1 (Q = 0),
            # beyond an upper endpoint (xi < 0) S = 0.
            z = np.maximum(yv, 0.0) * sinv
            kq = PQ(z, xi)
            Qv = kq.Q
            qg, qh = _chain2(kq, z)
            below = yv <= 0.0
            above = ~kq.ok
            Qv = np.where(below, 0.0, np.where(above, -np.inf, Qv))
            zero = below | above
            qg = np.where(zero[:, None], 0.0, qg)
            qh = np.where(zero[:, None, None], 0.0, qh)
            return Qv, qg, qh, above

        Q_lo, qg_lo, qh_lo, lo_above = endpoint(lo)
        Q_hi, qg_hi, qh_hi, _ = endpoint(hi)

        # G = S(lo) - S(hi) = exp(Q_lo) - exp(Q_hi), Q_lo > Q_hi.
        d = Q_lo - Q_hi
        cen_ok = (d > 0.0) & ~lo_above
        d = np.where(cen_ok, d, 1.0)
        off, r_lo, r_hi = _interval_parts(d)   # r_lo = S_lo/G here
        ll_c = Q_lo + off
        g_c = r_lo[:, None] * qg_lo - r_hi[:, None] * qg_hi
        h_c = np.empty(eta.shape + (2,))
        for a in range(2):
            for c in range(a, 2):
                t_lo = r_lo * (qg_lo[:, a] * qg_lo[:, c] + qh_lo[:, a, c])
                t_hi = r_hi * (qg_hi[:, a] * qg_hi[:, c] + qh_hi[:, a, c])
                t_hi = np.where(np.isfinite(t_hi), t_hi, 0.0)
                h_c[:, a, c] = (t_lo - t_hi) - g_c[:, a] * g_c[:, c]
        h_c[:, 1, 0] = h_c[:, 0, 1]

        use = ~exact
        ll = np.where(use, np.where(cen_ok, ll_c, -np.inf), ll)
        g = np.where(use[:, None], g_c, g)
        h = np.where(use[:, None, None], h_c, h)
        ok = np.where(use, cen_ok, ok)
        return ll, g, h, ok

    def theta(self, eta):
        eta = _as2d(eta)
        return np.exp(eta[:, 0]), eta[:, 1]

    def cdf(self, y, eta):
        psi, xi = self.theta(eta)
        return gpd_cdf(y, psi, xi)

    def quantile(self, p, eta):
        psi, xi = self.theta(eta)
        return gpd_quantile(p, psi, xi)

    def rvs(self, eta, rng):
        psi, xi = self.theta(eta)
        u = rng.uniform(size=np.broadcast(psi, xi).shape)
        return gpd_quantile(u, psi, xi)


class GaussFamily:
    """Gaussian density on (mean, log standard deviation)."""

    name = "gauss"
    nparam = 2
    param_names = ("mean", "logsd")
    links = ("identity", "log")
    supports_censoring = True

    def initial_values(self, y):
        sd = float(np.std(y))
        if sd <= 0.0:
            sd = 1.0
        return np.array([float(np.mean(y)), np.log(sd)])

    def point_terms(self, y, eta):
        eta = _as2d(eta)
        m, s = eta[:, 0], eta[:, 1]
        sinv = np.exp(-s)
        z = (y - m) * sinv
        ll = -0.5 * np.log(2.0 * np.pi) - s - 0.5 * z * z
        g = np.empty_like(eta)
        g[:, 0] = z * sinv
        g[:, 1] = z * z - 1.0
        h = np.empty(eta.shape + (2,))
        h[:, 0, 0] = -sinv * sinv
        h[:, 0, 1] = -2.0 * z * sinv
        h[:, 1, 1] = -2.0 * z * z
        h[:, 1, 0] = h[:, 0, 1]
        return ll, g, h, np.ones(len(ll), dtype=bool)

    def interval_terms(self, lo, hi, eta):
        eta = _as2d(eta)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        exact = hi <= lo
        ll, g, h, ok = self.point_terms(np.where(exact, lo, hi), eta)
        if np.all(exact):
            return ll, g, h, ok

        m, s = eta[:, 0], eta[:, 1]
        sinv = np.exp(-s)
        u_hi = (hi - m) * sinv
        u_lo = (lo - m) * sinv
        G = special.ndtr(u_hi) - special.ndtr(u_lo)
        cen_ok = G > 0.0
        Gs = np.where(cen_ok, G, 1.0)
        p_hi = norm.pdf(u_hi)
        p_lo = norm.pdf(u_lo)

        # du/d(m, s) with u = (y - m)/sd
        def du(u):
            return np.stack([np.broadcast_to(-sinv, u.shape), -u], axis=-1)

        d_hi, d_lo = du(u_hi), du(u_lo)
        g_c = (p_hi[:, None] * d_hi - p_lo[:, None] * d_lo) / Gs[:, None]
        h_c = np.empty(eta.shape + (2,))
        for a in range(2):
            for c in range(a, 2):
                # d^2 u / da dc: only (m,s) and (s,s) are nonzero.
                if a == 0 and c == 0:
                    uab_hi = uab_lo = 0.0
                elif a == 0 and c == 1:
                    uab_hi = uab_lo = sinv
                else:
                    uab_hi, uab_lo = u_hi, u_lo
                t_hi = p_hi * (uab_hi - u_hi * d_hi[:, a] * d_hi[:, c])
                t_lo = p_lo * (uab_lo - u_lo * d_lo[:, a] * d_lo[:, c])
                h_c[:, a, c] = (t_hi - t_lo) / Gs - g_c[:, a] * g_c[:, c]
        h_c[:, 1, 0] = h_c[:, 0, 1]

        use = ~exact
        ll = np.where(use, np.where(cen_ok, np.log(Gs), -np.inf), ll)
        g = np.where(use[:, None], g_c, g)
        h = np.where(use[:, None, None], h_c, h)
        ok = np.where(use, cen_ok, ok)
        return ll, g, h, ok

    def theta(self, eta):
        eta = _as2d(eta)
        return eta[:, 0], np.exp(eta[:, 1])

    def cdf(self, y, eta):
        m, sd = self.theta(eta)
        return special.ndtr((y - m) / sd)

    def quantile(self, p, eta):
        m, sd = self.theta(eta)
        return m + sd * special.ndtri(p)

    def rvs(self, eta, rng):
        m, sd = self.theta(eta)
        return rng.normal(m, sd)


class ExponentialFamily:
    """Exponential density on a single log-scale parameter."""

    name = "exponential"
    nparam = 1
    param_names = ("logscale",)
    links = ("log",)
    supports_censoring = True

    def initial_values(self, y):
        m = float(np.mean(y))
        if m <= 0.0:
            m = 1.0
        return np.array([np.log(m)])

    def point_terms(self, y, eta):
        eta = _as2d(eta)
        b = eta[:, 0]
        z = y * np.exp(-b)
        ll = -b - z
        g = (z - 1.0)[:, None]
        h = (-z)[:, None, None]
        return ll, g, h, y > 0.0

    def interval_terms(self, lo, hi, eta):
        eta = _as2d(eta)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        exact = hi <= lo
        ll, g, h, ok = self.point_terms(np.where(exact, lo, hi), eta)
        if np.all(exact):
            return ll, g, h, ok
        b = eta[:, 0]
        sinv = np.exp(-b)
        z_lo = np.maximum(lo, 0.0) * sinv
        z_hi = hi * sinv
        d = z_hi - z_lo
        cen_ok = d > 0.0
        d = np.where(cen_ok, d, 1.0)
        off, r_lo, r_hi = _interval_parts(d)
        ll_c = -z_lo + off
        # dQ/db = z at each endpoint (Q = -z); assemble as in the gpd case.
        g_c = (r_lo * z_lo - r_hi * z_hi)[:, None]
        t_lo = r_lo * (z_lo * z_lo - z_lo)
        t_hi = r_hi * (z_hi * z_hi - z_hi)
        h_c = (t_lo - t_hi - g_c[:, 0] ** 2)[:, None, None]
        use = ~exact
        ll = np.where(use, np.where(cen_ok, ll_c, -np.inf), ll)
        g = np.where(use[:, None], g_c, g)
        h = np.where(use[:, None, None], h_c, h)
        ok = np.where(use, cen_ok, ok)
        return ll, g, h, ok

    def theta(self, eta):
        return (np.exp(_as2d(eta)[:, 0]),)

    def cdf(self, y, eta):
        (sc,) = self.theta(eta)
        return -special.expm1(-y / sc)

    def quantile(self, p, eta):
        (sc,) = self.theta(eta)
        return -sc * np.log1p(-np.asarray(p, dtype=float))

    def rvs(self, eta, rng):
        (sc,) = self.theta(eta)
        return rng.exponential(sc)


class AldFamily:
    """Asymmetric Laplace density on (location, log scale) with a
    smoothed check function, for quantile regression at level tau.

    The check function rho_tau(z) = z*(tau - 1{z<0}) is replaced by
    rho(z) = tau*z + omega*log(1 + exp(-z/omega)), which is twice
    differentiable; omega controls the sharpness of the smoothing.
    """

    name = "ald"
    nparam = 2
    param_names = ("location", "logscale")
    links = ("identity", "log")
    supports_censoring = False

    def __init__(self, tau=0.5, omega=1e-3):
        if not 0.0 < tau < 1.0:
            raise ValueError("tau must lie strictly between 0 and 1")
        if omega <= 0.0:
            raise ValueError("omega must be positive")
        self.tau = float(tau)
        self.omega = float(omega)

    def initial_values(self, y):
        u0 = float(np.quantile(y, self.tau))
        mad = float(np.median(np.abs(y - np.median(y))))
        if mad <= 0.0:
            mad = max(float(np.std(y)), 1.0)
        return np.array([u0, np.log(mad)])

    def _rho_parts(self, z):
        w = self.omega
        # rho = tau*z + max(-z, 0) + w*log1p(exp(-|z|/w)) avoids overflow.
        a = np.abs(z) / w
        rho = self.tau * z + np.maximum(-z, 0.0) + w * np.log1p(np.exp(-a))
        sig = special.expit(-z / w)
        d1 = self.tau - sig
        d2 = sig * (1.0 - sig) / w
        return rho, d1, d2

    def point_terms(self, y, eta):
        eta = _as2d(eta)
        u, b = eta[:, 0], eta[:, 1]
        sinv = np.exp(-b)
        z = (y - u) * sinv
        rho, d1, d2 = self._rho_parts(z)
        ll = np.log(self.tau) + np.log1p(-self.tau) - b - rho
        g = np.empty_like(eta)
        g[:, 0] = d1 * sinv
        g[:, 1] = -1.0 + d1 * z
        h = np.empty(eta.shape + (2,))
        h[:, 0, 0] = -d2 * sinv * sinv
        h[:, 0, 1] = -(d2 * z + d1) * sinv
        h[:, 1, 1] = -d2 * z * z - d1 * z
        h[:, 1, 0] = h[:, 0, 1]
        return ll, g, h, np.ones(len(ll), dtype=bool)

    def theta(self, eta):
        eta = _as2d(eta)
        return eta[:, 0], np.exp(eta[:, 1])


class PPData:
    """Grouped r-largest order statistics for the point process family.

    values/group hold the flattened retained order statistics and the
    group index of each; anchor is each group's smallest retained value.
    """

    __slots__ = ("values", "group", "anchor", "ngroups", "ny", "counts")

    def __init__(self, values, group, anchor, ngroups, ny):
        self.values = np.asarray(values, dtype=float)
        self.group = np.asarray(group, dtype=np.intp)
        self.anchor = np.asarray(anchor, dtype=float)
        self.ngroups = int(ngroups)
        self.ny = float(ny)
        self.counts = np.bincount(self.group, minlength=self.ngroups)


def build_pp_data(y, group_ids, r, ny):
    """Retain the r largest values per group (r = -1 keeps all)."""
    y = np.asarray(y, dtype=float)
    codes, order = np.unique(np.asarray(group_ids), return_inverse=True)
    vals, grps = [], []
    anchor = np.empty(len(codes))
    for gi in range(len(codes)):
        yg = np.sort(y[order == gi])[::-1]
        if r is not None and r >= 0:
            yg = yg[:r]
        if len(yg) == 0:
            raise ValueError("empty group in point process data")
        vals.append(yg)
        grps.append(np.full(len(yg), gi, dtype=np.intp))
        anchor[gi] = yg[-1]
    return PPData(np.concatenate(vals), np.concatenate(grps), anchor,
                  len(codes), ny), codes


class PPFamily:
    """Poisson process likelihood for r-largest order statistics.

    Parameters follow the generalized extreme value layout
    (location, log scale, shape); design rows index groups, and every
    retained order statistic in a group shares that group's parameters.
    Per group the log likelihood is

        -ny * t_r^(-1/xi) + sum over retained values of
            [-log(psi) - (1/xi + 1) * log t]

    with t = 1 + xi*(y - mu)/psi and t_r evaluated at the group anchor.
    """

    name = "pp"
    nparam = 3
    param_names = ("location", "logscale", "shape")
    links = ("identity", "log", "identity")
    supports_censoring = False

    def initial_values(self, data):
        y = data.values
        sd = float(np.std(y))
        if sd <= 0.0:
            sd = 1.0
        psi0 = sd * np.sqrt(6.0) / np.pi
        mu0 = float(np.mean(y)) - EULER_GAMMA * psi0
        return np.array([mu0, np.log(psi0), 0.05])

    def point_terms(self, data, eta):
        eta = _as2d(eta)
        mu, b, xi = eta[:, 0], eta[:, 1], eta[:, 2]
        G = data.ngroups
        idx = data.group
        mu_v, b_v, xi_v = mu[idx], b[idx], xi[idx]
        sinv_v = np.exp(-b_v)
        z = (data.values - mu_v) * sinv_v
        kq = PQ(z, xi_v)
        zmu = -sinv_v
        zb = -z

        ll = np.zeros(G)
        g = np.zeros((G, 3))
        h = np.zeros((G, 3, 3))

        def gsum(x):
            return np.bincount(idx, weights=x, minlength=G)

        ll -= b * data.counts
        ll -= gsum(kq.P)
        g[:, 0] = gsum(-kq.Pz * zmu)
        g[:, 1] = -data.counts + gsum(-kq.Pz * zb)
        g[:, 2] = gsum(-kq.Pxi)
        h[:, 0, 0] = gsum(-kq.Pzz * zmu * zmu)
        h[:, 0, 1] = gsum(-kq.Pzz * zmu * zb - kq.Pz * sinv_v)
        h[:, 0, 2] = gsum(-kq.Pzxi * zmu)
        h[:, 1, 1] = gsum(-kq.Pzz * zb * zb - kq.Pz * z)
        h[:, 1, 2] = gsum(-kq.Pzxi * zb)
        h[:, 2, 2] = gsum(-kq.Pxixi)
        ok = gsum((~kq.ok).astype(float)) == 0.0

        # Intensity term at the group anchor.
        sinv_a = np.exp(-b)
        za = (data.anchor - mu) * sinv_a
        ka = PQ(za, xi)
        w = data.ny * np.exp(ka.Q)
        qg, qh = _chain3(ka, za, sinv_a)
        ll -= w
        g -= w[:, None] * qg
        for a in range(3):
            for c in range(a, 3):
                h[:, a, c] -= w * (qg[:, a] * qg[:, c] + qh[:, a, c])
        h[:, 1, 0] = h[:, 0, 1]
        h[:, 2, 0] = h[:, 0, 2]
        h[:, 2, 1] = h[:, 1, 2]
        ok &= ka.ok
        return ll, g, h, ok

    def theta(self, eta):
        eta = _as2d(eta)
        return eta[:, 0], np.exp(eta[:, 1]), eta[:, 2]


def gev_logcdf(y, mu, psi, xi):
    """log F for the generalized extreme value distribution."""
    y, mu, psi, xi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (y, mu, psi, xi)))
    z = (y - mu) / psi
    kq = PQ(z, xi)
    out = -np.exp(kq.Q)
    # Outside the support the distribution function is 0 or 1.
    out = np.where(kq.ok, out, np.where(xi > 0.0, -np.inf, 0.0))
    return out


def gev_quantile(p, mu, psi, xi):
    """Quantile of the generalized extreme value distribution.

    Uses mu - (psi/xi)*(1 - x^(-xi)) with x = -log p, and the Gumbel
    form mu - psi*log(x) when |xi| < 1e-6.
    """
    p, mu, psi, xi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (p, mu, psi, xi)))
    x = -np.log(p)
    ser = np.abs(xi) < XI_TOL
    xs = np.where(ser, 1.0, xi)
    with np.errstate(divide="ignore"):
        lx = np.log(x)
        exact = mu - psi / xs * (-special.expm1(-xs * lx))
        gumbel = mu - psi * lx
    return np.where(ser, gumbel, exact)


def gpd_cdf(y, psi, xi):
    """Distribution function of the generalized Pareto excess law."""
    y, psi, xi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (y, psi, xi)))
    z = np.maximum(y, 0.0) / psi
    kq = PQ(z, xi)
    out = -special.expm1(kq.Q)
    out = np.where(kq.ok, out, 1.0)
    return np.where(y <= 0.0, 0.0, out)


def gpd_quantile(p, psi, xi):
    """Quantile of the generalized Pareto excess law."""
    p, psi, xi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (p, psi, xi)))
    ser = np.abs(xi) < XI_TOL
    xs = np.where(ser, 1.0, xi)
    l1p = np.log1p(-p)
    exact = psi / xs * special.expm1(-xs * l1p)
    gumbel = -psi * l1p
    return np.where(ser, gumbel, exact)


def make_family(name, tau=None, omega=None):
    """Family factory used by the model builder and the command line."""
    name = str(name).lower()
    if name == "gev":
        return GevFamily()
    if name == "gpd":
        return GpdFamily()
    if name == "gauss":
        return GaussFamily()
    if name == "exponential":
        return ExponentialFamily()
    if name == "ald":
        kw = {}
        if tau is not None:
            kw["tau"] = tau
        if omega is not None:
            kw["omega"] = omega
        return AldFamily(**kw)
    if name == "pp":
        return PPFamily()
    raise ValueError(f"unknown family: {name!r}")
