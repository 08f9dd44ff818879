"""Twisted-eigenvalue and resolvent-integral numerics.

For a Bernoulli symbol law every transfer-type operator acts on constants
through the scalar

    lam(s, i*theta) = E[exp(-s*r + i*theta*phi)]
                    = exp(-s*xi) * H(z+) + exp(-s) * H(z-),

with z+ = exp(-s + i*theta), z- = exp(-i*theta) and H(z) = sum prob(n) z^n.
For the pure power tail, H(z) = (1 + (1 - 1/z) Li_p(z)) / 2 in terms of the
polylogarithm, which we evaluate by the Hurwitz expansion about z = 1 with a
precomputed zeta table (mpmath), falling back to the plain series away from
the unit circle; the p = 2 boundary uses dilogarithm closed forms.

The aggregate

    S(s) = int_{-pi}^{pi} dtheta / (1 - lam(s, i*theta))

is computed by fixed Gauss-Legendre panels refined geometrically towards the
theta = 0 peak (panel scale = the frequency-scale function of |s|), with the
40-vs-20-point difference as the error estimate.  The walk's return duration
enters through the renewal identity E[exp(-s*tau)] = 1 - 2*pi/S(s), and

    A(s) := E[tau * exp(-s*tau)] = -2*pi*i * (dS/db) / S^2,      s = u - i*b,

evaluated from the same panel pass (dS/db uses the exact derivative series).
"""

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .model import return_tail_target

_ZETA_TERMS = 56
_SERIES_RADIUS = 0.25


class AperiodicityError(RuntimeError):
    """1 - lam vanished away from the origin: lattice resonance."""

    def __init__(self, theta, s):
        self.theta = theta
        self.s = s
        super().__init__(f"1 - lambda ~ 0 at theta={theta!r}, s={s!r}")


class _Polylog:
    """Vectorized Li_s for fixed real non-integer s on |z| <= 1, z != 1.

    Near the unit circle: the Hurwitz expansion about z = 1 with the entire
    zeta-polynomial part evaluated by Horner, degree tiered by |ln z| (the
    series terms are w^k/k!, so small |w| needs far fewer).  Away from the
    circle: the defining series.
    """

    def __init__(self, s):
        self.s = float(s)
        if abs(self.s - round(self.s)) < 1e-12:
            raise ValueError("integer order needs the closed forms")
        self.gamma_1ms = complex(mpmath.gamma(1.0 - self.s))
        fact = np.cumprod(np.concatenate(([1.0],
                          np.arange(1, _ZETA_TERMS, dtype=float))))
        self.coef = np.array(
            [complex(mpmath.zeta(self.s - k)) for k in range(_ZETA_TERMS)]
        ) / fact
        # degree needed for |w|^K/K! * max|zeta| <= 1e-17
        self.tiers = []
        for wmax in (0.9, 1.9, 2.9, 4.1):
            K = 8
            while (wmax ** K / math.factorial(K)
                   * max(abs(c) * f for c, f in zip(self.coef, fact))
                   > 1e-18 and K < _ZETA_TERMS - 5):
                K += 4
            self.tiers.append((wmax, min(K, _ZETA_TERMS - 1)))

    def _horner(self, w, K):
        acc = np.full(w.shape, self.coef[K], dtype=complex)
        for k in range(K - 1, -1, -1):
            acc *= w
            acc += self.coef[k]
        return acc

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        flat = z.reshape(-1)
        res = out.reshape(-1)
        small = np.abs(flat) <= _SERIES_RADIUS
        if small.any():
            zs = flat[small]
            acc = np.zeros_like(zs)
            zp = np.ones_like(zs)
            for n in range(1, 64):
                zp = zp * zs
                acc += zp * n ** (-self.s)
            res[small] = acc
        big = np.nonzero(~small)[0]
        if big.size:
            w = np.log(flat[big])
            aw = np.abs(w)
            vals = self.gamma_1ms * (-w) ** (self.s - 1.0)
            lo = 0.0
            for wmax, K in self.tiers:
                sel = (aw > lo) & (aw <= wmax) if lo else (aw <= wmax)
                if sel.any():
                    vals[sel] += self._horner(w[sel], K)
                lo = wmax
            rest = aw > self.tiers[-1][0]
            if rest.any():
                vals[rest] += self._horner(w[rest], _ZETA_TERMS - 1)
            res[big] = vals
        return out


def _li2(z):
    """Dilogarithm on |z| <= 1 (p = 2 boundary)."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.array([complex(mpmath.polylog(2, zz)) for zz in flat])
    return out.reshape(z.shape)


class SpectralEvaluator:
    """lam(s, i*theta), its b-derivatives, S(s), and A(s) for one model."""

    def __init__(self, model):
        self.model = model
        self.law = model.law
        self.p = model.params.p
        self.xi = model.params.xi
        if not self.law.constant_ell:
            raise NotImplementedError(
                "closed-form spectral evaluation needs the constant-ell "
                "family; use lambda_hat_series for log-power laws")
        if self.p < 2.0:
            self._li_p = _Polylog(self.p)
            self._li_p1 = _Polylog(self.p - 1.0)
            self._li_p2 = _Polylog(self.p - 2.0)
        self._gl = {n: leggauss(n) for n in (20, 40)}

    # polylog stack ------------------------------------------------------------
    def _li(self, order, z):
        if self.p == 2.0:
            z = np.asarray(z, dtype=complex)
            if order == 0:
                return _li2(z)
            if order == 1:
                return -np.log(1.0 - z)
            return z / (1.0 - z)
        return (self._li_p, self._li_p1, self._li_p2)[order](z)

    def H(self, z):
        """sum_n prob(n) z^n; H(1) = 1/2."""
        z = np.asarray(z, dtype=complex)
        one = z == 1.0
        zz = np.where(one, 0.5, z)       # placeholder away from the pole
        out = 0.5 * (1.0 + (1.0 - 1.0 / zz) * self._li(0, zz))
        return np.where(one, 0.5 + 0.0j, out)

    def Hn(self, z):
        """sum_n prob(n) n z^n (no z = 1 pole for p > 1... finite there)."""
        z = np.asarray(z, dtype=complex)
        one = z == 1.0
        zz = np.where(one, 0.5, z)
        out = 0.5 * ((1.0 / zz) * self._li(0, zz)
                     + (1.0 - 1.0 / zz) * self._li(1, zz))
        if one.any():
            out = np.where(one, 0.5 * self.model.constants.sum_T + 0.0j, out)
        return out

    def Hnn(self, z):
        """sum_n prob(n) n^2 z^n, |z| < 1 only (diverges on the circle)."""
        z = np.asarray(z, dtype=complex)
        return 0.5 * ((1.0 / z) * (2.0 * self._li(1, z) - self._li(0, z))
                      + (1.0 - 1.0 / z) * self._li(2, z))

    # eigenvalue ---------------------------------------------------------------
    def lambda_hat(self, s, theta):
        """Leading eigenvalue of the doubly twisted operator (exact series
        in closed form).  Broadcasts over s and theta."""
        s = np.asarray(s, dtype=complex)
        theta = np.asarray(theta, dtype=float)
        zp = np.exp(-s + 1j * theta)
        zm = np.exp(-1j * theta) * np.ones_like(zp)
        return (np.exp(-s * self.xi) * self.H(zp)
                + np.exp(-s) * self.H(zm))

    def dlambda_db(self, s, theta):
        """d lam / d b at s = u - i b: equals i * E[r exp(-s r + i theta phi)]."""
        s = np.asarray(s, dtype=complex)
        theta = np.asarray(theta, dtype=float)
        zp = np.exp(-s + 1j * theta)
        zm = np.exp(-1j * theta) * np.ones_like(zp)
        core = (np.exp(-s * self.xi) * (self.Hn(zp) + self.xi * self.H(zp))
                + np.exp(-s) * self.H(zm))
        return 1j * core

    def d2lambda_db2(self, s, theta):
        """Second b-derivative, u > 0 required: -E[r^2 exp(-s r + ...)]."""
        s = np.asarray(s, dtype=complex)
        if np.any(s.real <= 0.0):
            raise ValueError("second derivative needs u > 0")
        theta = np.asarray(theta, dtype=float)
        zp = np.exp(-s + 1j * theta)
        zm = np.exp(-1j * theta) * np.ones_like(zp)
        core = (np.exp(-s * self.xi)
                * (self.Hnn(zp) + 2.0 * self.xi * self.Hn(zp)
                   + self.xi ** 2 * self.H(zp))
                + np.exp(-s) * self.H(zm))
        return -core

    def lambda_hat_series(self, s, theta, tol=1e-12, max_terms=1 << 26,
                          return_bound=False):
        return lambda_hat_series(self.model, s, theta, tol=tol,
                                 max_terms=max_terms,
                                 return_bound=return_bound)

    def one_minus_lambda_real(self, theta):
        """Re(1 - lam(0, i*theta)) = E[1 - cos(theta*phi)], cancellation-free
        for tiny theta via 2 sin^2 half-angle terms; series route."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        N = 4_000_000
        out = np.zeros(theta.shape)
        chunk = 1 << 21
        for lo in range(1, N + 1, chunk):
            ns = np.arange(lo, min(lo + chunk - 1, N) + 1, dtype=np.float64)
            pn = self.law.prob_n(ns)
            for i, th in enumerate(theta):
                sn = np.sin(0.5 * th * ns)
                out[i] += 2.0 * np.dot(pn, sn * sn)
        # integration-by-parts bound on the dropped oscillatory tail
        tail = self.law.T(float(N + 1))
        return out, tail

    # S and A ------------------------------------------------------------------
    def _theta_scale(self, s_abs):
        c = self.model.constants.c_p * self.model.constants.c_ell
        scale = (s_abs * self.model.constants.r_star / c) ** (1.0 / self.p)
        return min(max(scale, 1e-9), 0.4)

    def _panels(self, theta_star):
        edges = [theta_star]
        while edges[-1] < math.pi:
            edges.append(min(edges[-1] * 2.0, math.pi))
        pos = [0.0] + edges
        full = sorted(set([-e for e in pos] + pos))
        return list(zip(full[:-1], full[1:]))

    def _quad_nodes(self, panels, order):
        x, w = self._gl[order]
        nodes, wts = [], []
        for a, b in panels:
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            wts.append(0.5 * (b - a) * w)
        return np.concatenate(nodes), np.concatenate(wts)

    def _S_once(self, s, theta, wts, want_db):
        ns = s.shape[0]
        S = np.zeros(ns, dtype=complex)
        dS = np.zeros(ns, dtype=complex) if want_db else None
        chunk = max(1, (1 << 22) // theta.size)
        zm_H = self.H(np.exp(-1j * theta))
        for lo in range(0, ns, chunk):
            sl = s[lo:lo + chunk, None]
            zp = np.exp(-sl + 1j * theta[None, :])
            Hp = self.H(zp)
            lam = np.exp(-sl * self.xi) * Hp + np.exp(-sl) * zm_H[None, :]
            om = 1.0 - lam
            bad = np.abs(om) < 1e-13
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise AperiodicityError(float(theta[j]), complex(sl[i, 0]))
            S[lo:lo + chunk] = (wts[None, :] / om).sum(axis=1)
            if want_db:
                Hnp = self.Hn(zp)
                dlam = 1j * (np.exp(-sl * self.xi)
                             * (Hnp + self.xi * Hp)
                             + np.exp(-sl) * zm_H[None, :])
                dS[lo:lo + chunk] = (wts[None, :] * dlam / om ** 2).sum(axis=1)
        return S, dS

    def S_batch(self, s, want_db=True, rel_tol=1e-8, max_refine=4):
        """S(s) (and dS/db) for an array of s; panel-doubling refinement
        until the 20- vs 40-point Gauss difference is below rel_tol."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        if np.any((s.real == 0.0) & (s.imag == 0.0)):
            raise ValueError("S(0) diverges: (u, b) = (0, 0) excluded")
        theta_star = self._theta_scale(float(np.min(np.abs(s))))
        panels = self._panels(theta_star)
        for attempt in range(max_refine + 1):
            n40, w40 = self._quad_nodes(panels, 40)
            n20, w20 = self._quad_nodes(panels, 20)
            S40, dS40 = self._S_once(s, n40, w40, want_db)
            S20, _ = self._S_once(s, n20, w20, False)
            err = np.max(np.abs(S40 - S20) / np.abs(S40))
            if err <= rel_tol:
                return S40, dS40, float(err)
            panels = [q for a, b in panels
                      for q in ((a, 0.5 * (a + b)), (0.5 * (a + b), b))]
        raise RuntimeError(
            f"theta-quadrature did not reach rel_tol={rel_tol} after "
            f"{max_refine} panel doublings ({len(panels)} panels, err={err})")

    def S(self, s, quad_tol=1e-8):
        S, _, err = self.S_batch(np.array([s]), want_db=False, rel_tol=quad_tol)
        return complex(S[0]), err

    def laplace_tau(self, s, rel_tol=1e-8):
        """E[exp(-s*tau)] via the renewal identity 1 - 2*pi/S(s)."""
        S, _, err = self.S_batch(s, want_db=False, rel_tol=rel_tol)
        return 1.0 - 2.0 * math.pi / S, err

    def A(self, s, rel_tol=1e-8):
        """A(s) = E[tau exp(-s*tau)] = -2*pi*i * S'_b / S^2."""
        S, dS, err = self.S_batch(s, want_db=True, rel_tol=rel_tol)
        return -2j * math.pi * dS / S ** 2, err

    def A_fd(self, s, h_rel=1e-4, rel_tol=1e-10):
        """Central-difference route in b for cross-checking A."""
        s = complex(s)
        h = max(abs(s), 1e-6) * h_rel
        vals, _ = self.laplace_tau(np.array([s - 1j * h, s + 1j * h]),
                                   rel_tol=rel_tol)
        dphi_db = (vals[0] - vals[1]) / (2.0 * h)   # b -> s - i b
        return -1j * dphi_db


def _series_tail_bound(law, N, u, theta):
    """Certified bound on |sum_{n>N}| of both branches: the plain prob tail,
    improved by Abel summation when the phase rotates (partial geometric
    sums bounded, prob(n) decreasing)."""
    xi = law.xi
    pN = 0.5 * float(law.prob_n(float(N + 1)))
    TN = 0.5 * float(law.T(float(N + 1)))
    plain_plus = TN * math.exp(-u * (N + 1 + xi))
    plain_minus = TN * math.exp(-u)
    den_p = abs(1.0 - math.exp(-u) * cmath.exp(1j * theta))
    den_m = abs(1.0 - cmath.exp(-1j * theta))
    abel_plus = (2.0 * pN / den_p * math.exp(-u * xi)
                 if den_p > 1e-12 else math.inf)
    abel_minus = (2.0 * pN * math.exp(-u) / den_m
                  if den_m > 1e-12 else math.inf)
    return min(plain_plus, abel_plus) + min(plain_minus, abel_minus)


def lambda_hat_series(model, s, theta, tol=1e-12, max_terms=1 << 26,
                      return_bound=False):
    """Direct-series eigenvalue for any tail family, with a certified
    remainder bound <= tol; raises (naming the required N) if the bound
    cannot be met within max_terms."""
    law = model.law
    s = complex(s)
    u = s.real
    xi = law.xi
    N = 1 << 12
    while _series_tail_bound(law, N, u, theta) > tol:
        N *= 2
        if N > max_terms:
            need = int(math.ceil((2.0 * tol) ** (-1.0 / law.p)))
            raise ValueError(
                f"series tolerance {tol} unreachable within {max_terms} "
                f"terms; plain tail bound needs ~{need}")
    total = 0.0 + 0.0j
    chunk = 1 << 20
    for lo in range(1, N + 1, chunk):
        hi = min(lo + chunk - 1, N)
        ns = np.arange(lo, hi + 1, dtype=np.float64)
        pn = 0.5 * law.prob_n(ns)
        zp = np.exp((-s) * (ns + xi) + 1j * theta * ns)
        zm = np.exp(-s + (-1j) * theta * ns)
        total += np.sum(pn * (zp + zm))
    if return_bound:
        return total, _series_tail_bound(law, N, u, theta)
    return total


def A_of_s(model, ev, s, method="spectral", taus=None, rel_tol=1e-8):
    """A(s) = E[tau exp(-s*tau)] by the requested route.

    method="spectral": resolvent quadrature (u >= 0, s != 0);
    method="mc": damped average over a stored excursion sample (u > 0);
    method="both": returns (spectral, mc, combined_tolerance) and raises if
    the two disagree beyond it.
    """
    s = complex(s)
    if method == "spectral":
        val, _ = ev.A(np.array([s]), rel_tol=rel_tol)
        return complex(val[0])
    if method == "mc":
        if taus is None:
            raise ValueError("mc route needs a stored excursion sample")
        return a_mc(taus, s)[0]
    if method == "both":
        sp = A_of_s(model, ev, s, "spectral", rel_tol=rel_tol)
        mc, se = a_mc(taus, s)
        tol = 4.0 * se + 10.0 * rel_tol * abs(sp) + 1e-10
        if abs(sp - mc) > tol:
            raise RuntimeError(
                f"A({s}) routes disagree: spectral {sp}, mc {mc}, tol {tol}")
        return sp, mc, tol
    raise ValueError(f"unknown method {method!r}")


def laplace_mc(taus, s):
    """Monte-Carlo E[exp(-s*tau)] with a standard error, from stored taus."""
    s = complex(s)
    vals = np.exp(-s * taus)
    mean = vals.mean()
    se = math.hypot(vals.real.std(ddof=1), vals.imag.std(ddof=1)) \
        / math.sqrt(taus.size)
    return complex(mean), float(se)


def a_mc(taus, s):
    """Monte-Carlo A(s) = E[tau exp(-s*tau)], u > 0 required."""
    s = complex(s)
    if s.real <= 0.0:
        raise ValueError("Monte-Carlo route needs damping u > 0")
    vals = taus * np.exp(-s * taus)
    mean = vals.mean()
    se = math.hypot(vals.real.std(ddof=1), vals.imag.std(ddof=1)) \
        / math.sqrt(taus.size)
    return complex(mean), float(se)


# ------------------------------------------------------------ expansions ----

@dataclass
class ExpansionFit:
    theta_exponent: float        # structured fit (known theta^2 correction)
    theta_exponent_plain: float  # plain power-law least squares
    coeff_one_term: float
    coeff_two_term: float
    coeff_target: float
    dlam_db_mag: float
    dlam_db_value: complex
    r_star: float
    p2_log_slope: float = float("nan")

    @property
    def dlam_sign_note(self):
        return ("direct series gives d lambda/d b -> +i r* at the origin; "
                "the stated limit elsewhere carries the opposite sign")


def verify_eigenvalue_expansion(model, ev, theta_grid=None, b_step=1e-6):
    """Fits of Re(1 - lam(0, i*theta)) against c * theta^p and of the linear
    b-coefficient at theta = 0 (target magnitude r*).

    The symbol has an exact theta^2 next-order term (the truncated second
    moment), so both the exponent and the coefficient are extracted from the
    structured model c * theta^q * (1 + c2 * theta^(2-p)); the plain
    power-law least-squares values are reported alongside (they soak the
    pre-asymptotic drift into the estimates).
    """
    p = model.params.p
    consts = model.constants
    if theta_grid is None:
        theta_grid = np.logspace(-4, -2, 25)
    lam = ev.lambda_hat(0.0, theta_grid)
    y = np.real(1.0 - lam)
    slope_plain, _ = np.polyfit(np.log(theta_grid), np.log(y), 1)
    if p < 2.0:
        design = np.column_stack([np.ones_like(theta_grid),
                                  theta_grid ** (2.0 - p)])
        coef, *_ = np.linalg.lstsq(design, y / theta_grid ** p, rcond=None)
        two_term = float(coef[0])
        one_term = float(np.exp(np.mean(np.log(y) - p * np.log(theta_grid))))
        target = consts.c_p * consts.c_ell
        p2_slope = float("nan")
        # structured exponent: ln y = a + q ln theta + ln(1 + c2 th^(2-p)),
        # Gauss-Newton on (a, q, c2) starting from the plain fit
        a_par = math.log(one_term)
        q = float(slope_plain)
        c2 = float(coef[1] / coef[0])
        ly = np.log(y)
        lth = np.log(theta_grid)
        thc = theta_grid ** (2.0 - p)
        for _ in range(80):
            corr = 1.0 + c2 * thc
            resid = ly - (a_par + q * lth + np.log(corr))
            Jm = np.column_stack([np.ones_like(lth), lth, thc / corr])
            step, *_ = np.linalg.lstsq(Jm, resid, rcond=None)
            a_par += step[0]
            q += step[1]
            c2 += step[2]
            if np.max(np.abs(step)) < 1e-13:
                break
        slope = float(q)
    else:
        # coefficient of theta^2 grows like ell_2(1/theta) = 2 c_ell ln(1/t)
        design = np.column_stack([np.ones_like(theta_grid),
                                  np.log(1.0 / theta_grid)])
        coef, *_ = np.linalg.lstsq(design, y / theta_grid ** 2, rcond=None)
        p2_slope = float(coef[1])
        two_term = p2_slope
        one_term = p2_slope
        # the symmetric two-sided displacement doubles the one-sided
        # logarithmic moment entering the theta^2 coefficient
        target = 4.0 * consts.c_p * consts.c_ell
        slope = float(slope_plain)
    dl = complex(ev.dlambda_db(np.array([0j]), 0.0)[0])
    _ = b_step
    return ExpansionFit(
        theta_exponent=float(slope), theta_exponent_plain=float(slope_plain),
        coeff_one_term=one_term,
        coeff_two_term=two_term, coeff_target=float(target),
        dlam_db_mag=abs(dl), dlam_db_value=dl, r_star=consts.r_star,
        p2_log_slope=p2_slope)


# ------------------------------------------------------------- constants ----

@dataclass
class ConstantsReport:
    p: float
    r_star: float
    beta: float
    c_p: float
    d_beta: float
    J: float
    J_quad: float
    K_p: float
    K_p_quad: float
    K_p_prime: float
    K_p_prime_quad: float
    C_0_paper: float
    C_1_paper_a: float
    C_1_paper_b: float
    C_p_paper_a: float
    C_p_paper_b: float
    C_p_exact: complex
    C_p_freq: complex
    d_0: float
    d_p_exact: float
    return_tail_target: float
    d_p_candidates: list = field(default_factory=list)

    def to_dict(self):
        d = {}
        for k, v in self.__dict__.items():
            if isinstance(v, complex):
                d[k] = {"re": v.real, "im": v.imag, "abs": abs(v),
                        "arg": cmath.phase(v)}
            else:
                d[k] = v
        return d


def compute_constants(model):
    """Constant chain: the stated-resolvent route (K_p, K_p') verbatim with
    quadrature cross-checks, and the exact scalar chain whose d_p candidate
    is adjudicated by the simulated smooth tail.

    The exact chain lives in the same normalization as the rescaled Monte
    Carlo statistics (model ell_star); C_p_freq carries the frequency-scale
    version, whose modulus (p-1) sin(pi/p) (r*)^(1-1/p) depends only on
    (p, r*).
    """
    p = model.params.p
    consts = model.constants
    r = consts.r_star
    beta = consts.beta
    c_p = consts.c_p

    J = gamma_fn(1.0 - 1.0 / p) * math.sin(math.pi / (2.0 * p))
    J_head, _ = quad(lambda b: b ** (-1.0 / p) * math.cos(b), 0.0, 1.0,
                     epsabs=1e-12, epsrel=1e-12)
    J_tail, _ = quad(lambda b: b ** (-1.0 / p), 1.0, np.inf,
                     weight="cos", wvar=1.0)
    J_quad = J_head + J_tail

    K_p = math.pi * r ** (1.0 / p) / (p * math.sin(math.pi / (2.0 * p)))
    K_quad, _ = quad(lambda x: 2.0 / (1.0 + x ** (2.0 * p) / r ** 2),
                     0.0, np.inf, epsabs=1e-11, epsrel=1e-11, limit=400)
    K_prime = beta * K_p
    Kp_quad, _ = quad(
        lambda x: 2.0 * (1.0 - x ** (2.0 * p) / r ** 2)
        / (1.0 + x ** (2.0 * p) / r ** 2) ** 2,
        0.0, np.inf, epsabs=1e-11, epsrel=1e-11, limit=400)

    if not (c_p > 0 and K_p > 0 and K_prime > 0):
        raise AssertionError("positivity of the constant chain failed")

    C0 = c_p ** (1.0 / p) * K_p / r
    C1a = c_p ** (1.0 / p) * K_prime / r
    C1b = K_prime / r ** 2
    Cpa = C1a / C0 ** 2
    Cpb = C1b / C0 ** 2

    target = return_tail_target(consts)
    phase = cmath.exp(1j * math.pi / (2.0 * p))
    base_freq = (p - 1.0) * math.sin(math.pi / p) * r ** (1.0 - 1.0 / p)
    C_p_freq = base_freq * phase
    if model.params.ell_kind == "constant":
        # conversion into the model ell_star basis
        conv = (c_p * consts.c_ell ** 2) ** (1.0 / p)
    else:
        # no constant conversion exists for a genuinely varying ell; report
        # the frequency-scale basis (constants depend only on p and r*)
        conv = 1.0
    C_p_exact = base_freq * conv * phase
    d_0 = 2.0 * C_p_exact.real
    d_p_exact = d_0 * J / math.pi

    cands = []
    for tag, d0 in (("exact", d_0),
                    ("stated-a", 2.0 * Cpa), ("stated-b", 2.0 * Cpb)):
        cands.append({"tag": f"{tag}:(d0/pi)*J", "value": d0 * J / math.pi})
        cands.append({"tag": f"{tag}:d0*J", "value": d0 * J})
        cands.append({"tag": f"{tag}:d0*J/pi^2",
                      "value": d0 * J / math.pi ** 2})

    return ConstantsReport(
        p=p, r_star=r, beta=beta, c_p=c_p,
        d_beta=math.sin(math.pi * beta) / math.pi,
        J=J, J_quad=J_quad, K_p=K_p, K_p_quad=K_quad,
        K_p_prime=K_prime, K_p_prime_quad=Kp_quad,
        C_0_paper=C0, C_1_paper_a=C1a, C_1_paper_b=C1b,
        C_p_paper_a=Cpa, C_p_paper_b=Cpb,
        C_p_exact=C_p_exact, C_p_freq=C_p_freq, d_0=d_0,
        d_p_exact=d_p_exact, return_tail_target=target,
        d_p_candidates=cands)


# ----------------------------------------------------------- aperiodicity ----

@dataclass
class ScanReport:
    max_abs: float
    argmax_b: float
    argmax_theta: float
    margin: float
    passed: bool
    flagged: list


def aperiodicity_scan(model, ev=None, K=20.0, n_b=801, n_theta=315,
                      exclude_radius=0.01, threshold=1.0 - 1e-6):
    """max |lam(i*b, i*theta)| over the grid minus a ball at the origin.

    Lattice-resonance probe points (b = 2*pi*k, theta = 0) are always
    included: an integer-valued roof shows |lam| = 1 there exactly, which is
    the negative control for the joint-aperiodicity hypothesis.
    """
    ev = ev or SpectralEvaluator(model)
    bs = np.linspace(-K, K, n_b)
    thetas = np.linspace(-math.pi, math.pi, n_theta, endpoint=False)
    probes_b = np.arange(1, int(K / (2 * math.pi)) + 1) * 2.0 * math.pi
    best = (0.0, 0.0, 0.0)
    flagged = []
    chunk = max(1, (1 << 21) // n_theta)
    for lo in range(0, n_b, chunk):
        bb = bs[lo:lo + chunk]
        lam = ev.lambda_hat(-1j * bb[:, None], thetas[None, :])
        mags = np.abs(lam)
        mask = (bb[:, None] ** 2 + thetas[None, :] ** 2
                > exclude_radius ** 2)
        mags = np.where(mask, mags, 0.0)
        i, j = np.unravel_index(np.argmax(mags), mags.shape)
        if mags[i, j] > best[0]:
            best = (float(mags[i, j]), float(bb[i]), float(thetas[j]))
    for b in probes_b:
        m = float(np.abs(ev.lambda_hat(np.array([-1j * b]), 0.0))[0])
        if m > best[0]:
            best = (m, float(b), 0.0)
        if m >= threshold:
            flagged.append({"b": float(b), "theta": 0.0, "abs": m})
    max_abs, argb, argt = best
    return ScanReport(max_abs=max_abs, argmax_b=argb, argmax_theta=argt,
                      margin=1.0 - max_abs, passed=max_abs < threshold,
                      flagged=flagged)
