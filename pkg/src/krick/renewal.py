"""Fourier inversion machinery for the weighted return-duration measure.

Pieces: the triangle/Fejer-type kernel pair (g_a, ghat_a) with its analytic
half-plane extensions, the damped measures nu_u with density x*exp(-u*x)
against the law of tau (represented by reweighting one stored excursion
sample, so different u stay coupled), the two-sided inversion identity

    int e^{-i lam (x-t)} ghat_a(x-t) dV_u(x)
        = int e^{-i t b} g_a(b + lam) Re A(u - i b) db,

the windowed oscillatory limit

    m(t) * int g_a(b + lam) A(1/t - i b) e^{(1/t - i b) t} db
        -> pi * d_p * g_a(lam),         m(t) = t^(1-1/p) ell_star(t),

with the |b| <> M/t split reported separately (M = sqrt(t) by default), and
the tent-kernel Laplace identity E[e^{-s tau}] = g_0(s) * L[Mhat](s).

All oscillatory b-integrals use fixed Gauss-Legendre panels with width tied
to 1/t; adaptive rules mis-converge on the e^{-i b t} oscillation, and the
panel rule has a per-panel error estimate instead.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

_GL8 = leggauss(8)
_GL16 = leggauss(16)


@dataclass(frozen=True)
class KernelPair:
    """Triangle kernel g_a (of a real frequency argument) and its Fourier
    transform ghat_a(x) = 2(1 - cos ax)/(a x)^2 * (1/1), ghat_a(0) = 1."""
    a: float

    def g(self, b):
        b = np.asarray(b, dtype=float)
        out = np.where(np.abs(b) <= self.a,
                       (1.0 - np.abs(b) / self.a) / self.a, 0.0)
        return out

    def ghat(self, x):
        x = np.asarray(x, dtype=float)
        # sinc form of 2(1-cos ax)/(a^2 x^2): exact and stable near 0
        return np.sinc(self.a * x / (2.0 * math.pi)) ** 2

    def g_plus(self, s):
        s = np.asarray(s, dtype=complex)
        return (1.0 + 1j * s / self.a) / self.a

    def g_minus(self, s):
        s = np.asarray(s, dtype=complex)
        return (1.0 - 1j * s / self.a) / self.a

    def fourier_residual(self, lam):
        """|int e^{-i lam x} ghat(x) dx - 2 pi g(lam)| by an independent
        numerical route (QAWF Fourier quadrature; sine-integral tail for
        the lam = 0 case where the cosine weight degenerates)."""
        from scipy.special import sici
        X = 1.0
        head, _ = quad(lambda x: float(self.ghat(x)), 0.0, X,
                       epsabs=1e-13, epsrel=1e-13)
        if lam == 0.0:
            si, _ci = sici(self.a * X)
            tail = (2.0 / self.a ** 2) * ((1.0 - math.cos(self.a * X)) / X
                                          + self.a * (math.pi / 2.0 - si))
        else:
            tail, _ = quad(lambda x: float(self.ghat(x)), X, np.inf,
                           weight="cos", wvar=lam)
        val = 2.0 * (head if lam == 0.0 else
                     quad(lambda x: float(self.ghat(x) * np.cos(lam * x)),
                          0.0, X, epsabs=1e-13, epsrel=1e-13)[0]) + 2.0 * tail
        return abs(val - 2.0 * math.pi * float(self.g(lam)))

    def lipschitz_extension_residual(self, gamma, u_grid=None, b_grid=None):
        """max over the grid of |g±(u+ib) - g±(ib)| / u^gamma (the analytic
        extensions are linear in s, so this is u^(1-gamma)/a^2)."""
        u_grid = np.logspace(-6, 0, 25) if u_grid is None else u_grid
        b_grid = np.linspace(-self.a, self.a, 21) if b_grid is None else b_grid
        worst = 0.0
        for u in u_grid:
            s1 = u + 1j * b_grid
            s0 = 1j * b_grid
            for gfun in (self.g_plus, self.g_minus):
                d = np.max(np.abs(gfun(s1) - gfun(s0))) / u ** gamma
                worst = max(worst, float(d))
        return worst


class WeightedTauMeasure:
    """nu_u with d nu_u / d(mu o tau) = x e^{-u x}, from stored excursions."""

    def __init__(self, taus, u=0.0):
        self.taus = np.asarray(taus, dtype=float)
        self.u = float(u)

    def weights(self):
        return self.taus * np.exp(-self.u * self.taus)

    def total_mass(self):
        if self.u <= 0.0:
            raise ValueError("nu_0 has infinite mass; damping u > 0 required")
        return float(self.weights().mean())

    def window(self, lo, hi):
        """nu_u-mass of [lo, hi) per unit of mu."""
        w = self.weights()
        sel = (self.taus >= lo) & (self.taus < hi)
        return float(w[sel].sum() / self.taus.size)

    def fourier(self, b):
        """int e^{i b x} d nu_u = A(u - i b), Monte-Carlo side."""
        w = self.weights() * np.exp(1j * b * self.taus)
        return complex(w.mean())

    def v_symmetrized_window(self, lo, hi):
        """V_u = (nu_u + nu_u(-.))/2; the negative part vanishes."""
        return 0.5 * self.window(lo, hi)

    def second_moment_increments(self, T_grid=(10.0, 1e2, 1e3, 1e4)):
        """int_1^T x^-2 d nu_0 = E[tau^-1; tau <= T]: Cauchy increments."""
        vals = []
        for T in T_grid:
            sel = (self.taus >= 1.0) & (self.taus <= T)
            vals.append(float((1.0 / self.taus[sel]).sum() / self.taus.size))
        incs = np.diff(vals)
        return vals, incs


def _panel_nodes(lo, hi, max_width, rule=_GL8, peak_scale=None):
    """Gauss-Legendre panels on [lo, hi] with width <= max_width, refined
    geometrically towards b = 0 when the integrand carries a peak of width
    ``peak_scale`` there (A(u - ib) varies on the scale u near b = 0)."""
    base = np.linspace(lo, hi, max(1, int(math.ceil((hi - lo) / max_width))) + 1)
    edges = set(np.round(base, 14))
    if peak_scale is not None and lo < 0.0 < hi:
        e = peak_scale / 2.0
        while e < min(hi, -lo, 16.0 * peak_scale):
            edges.add(e)
            edges.add(-e)
            e *= 2.0
        edges.add(0.0)
    edges = np.array(sorted(e for e in edges if lo <= e <= hi))
    x, w = rule
    nodes = 0.5 * (edges[1:] - edges[:-1])[:, None] * x[None, :] \
        + 0.5 * (edges[1:] + edges[:-1])[:, None]
    wts = 0.5 * (edges[1:] - edges[:-1])[:, None] * w[None, :]
    return nodes.reshape(-1), wts.reshape(-1)


@dataclass
class InversionResult:
    u: float
    a: float
    t: float
    lam: float
    lhs: complex
    rhs: complex
    diff: float
    mc_se: float
    quad_err: float
    budget: float

    @property
    def ok(self):
        return self.diff <= self.budget


def inversion_check(model, ev, taus, u, a, t, lam, quad_tol=3e-5,
                    z_score=4.0):
    """Both sides of the inversion identity for one parameter combo; see
    inversion_check_batch."""
    return inversion_check_batch(model, ev, taus, [(u, a, t, lam)],
                                 quad_tol=quad_tol, z_score=z_score)[0]


def inversion_check_batch(model, ev, taus, combos, quad_tol=3e-5,
                          z_score=4.0):
    """Both sides of the inversion identity for the symmetrized measure V_u.

    The left side averages e^{-i lam (x-t)} ghat(x-t) over the reweighted
    excursion sample (and its mirror); the right side integrates the
    triangle kernel against Re A(u - i b) from the resolvent quadrature
    (coarse + halved panel rules; their difference estimates the
    oscillatory quadrature error).  The identity is exact for u > 0, so the
    difference must sit inside the combined Monte-Carlo + quadrature budget.

    A-values are evaluated in one resolvent pass per distinct damping u,
    which keeps the 8-combo acceptance run affordable.
    """
    taus = np.asarray(taus, dtype=float)
    by_u = {}
    plans = []
    for u, a, t, lam in combos:
        if u <= 0.0:
            raise ValueError("the absolutely convergent regime needs u > 0")
        width = min(math.pi / (4.0 * max(t, 1.0)), a / 8.0)
        n1, w1 = _panel_nodes(-a - lam, a - lam, width, peak_scale=u)
        n2, w2 = _panel_nodes(-a - lam, a - lam, width / 2.0,
                              peak_scale=u / 2.0)
        slot = by_u.setdefault(u, [])
        plans.append((u, a, t, lam, n1, w1, n2, w2, len(slot)))
        slot.append((n1, n2))
    a_values = {}
    a_errs = {}
    for u, slots in by_u.items():
        all_nodes = np.concatenate([np.concatenate(pair) for pair in slots])
        Av, err = ev.A(u - 1j * all_nodes, rel_tol=quad_tol)
        a_values[u] = Av
        a_errs[u] = err

    results = []
    for u, a, t, lam, n1, w1, n2, w2, slot_idx in plans:
        kp = KernelPair(a)
        w = taus * np.exp(-u * taus)
        f = 0.5 * w * (np.exp(-1j * lam * (taus - t)) * kp.ghat(taus - t)
                       + np.exp(1j * lam * (taus + t)) * kp.ghat(taus + t))
        lhs = complex(f.mean())
        mc_se = math.hypot(f.real.std(ddof=1), f.imag.std(ddof=1)) \
            / math.sqrt(taus.size)
        offset = 0
        for k in range(slot_idx):
            pair = by_u[u][k]
            offset += pair[0].size + pair[1].size
        A1 = a_values[u][offset:offset + n1.size]
        A2 = a_values[u][offset + n1.size:offset + n1.size + n2.size]
        rhs = complex(np.sum(
            w1 * np.exp(-1j * t * n1) * kp.g(n1 + lam) * A1.real))
        rhs2 = complex(np.sum(
            w2 * np.exp(-1j * t * n2) * kp.g(n2 + lam) * A2.real))
        # resolvent error propagates through the absolute integrand mass
        # (the oscillatory rhs itself can be much smaller than the mass)
        abs_mass = float(np.sum(np.abs(w2 * kp.g(n2 + lam) * A2.real)))
        quad_err = abs(rhs - rhs2) + a_errs[u] * abs_mass
        diff = abs(lhs - rhs2)
        budget = z_score * mc_se + quad_err + quad_tol
        results.append(InversionResult(
            u=u, a=a, t=t, lam=lam, lhs=lhs, rhs=rhs2, diff=diff,
            mc_se=mc_se, quad_err=quad_err, budget=budget))
    return results


@dataclass
class FgaRow:
    t: float
    M: float
    value: complex               # m(t) * full integral (contour at u = 1/t)
    value_re_A: complex          # same with Re A(u - i b) in the integrand
    I1: complex
    I2: complex
    m_t: float
    target: float                # pi * d_p * g_a(lam): limit of value_re_A
    target_full: float           # 2x target: limit of the full-A value
    m_I2_abs: float


def fga_limit(model, ev, a, lam, t_grid, M_rule="sqrt", quad_rel=1e-4):
    """Windowed oscillatory integral m(t) int g_a(b+lam) A(1/t-ib) e^{(1/t-ib)t} db.

    The damping u = 1/t realizes the contour shift that makes the integrand
    smooth; the |b| <= M/t core (I1) carries the limit while m(t)*I2 must
    decay.  M = sqrt(t) unless overridden by a callable M_rule.

    Two integrand variants are reported: with Re A (the symmetrized-measure
    transform), whose limit is pi*d_p*g_a(lam), and with the full complex A,
    whose limit is exactly twice that -- the measure is supported on the
    positive axis, so the imaginary part of its transform contributes an
    equal real term under the oscillation: the ratio of the two limits is
    1 + tan(pi/(2p)) * cot(pi/(2p)) = 2 for every p.
    """
    from .spectral import compute_constants
    consts = model.constants
    rep = compute_constants(model)
    kp = KernelPair(a)
    rows = []
    for t in t_grid:
        if t < 10.0:
            raise ValueError("fga limit needs t >= 10")
        M = math.sqrt(t) if M_rule == "sqrt" else float(M_rule(t))
        u = 1.0 / t
        width = math.pi / (4.0 * t)
        m_t = consts.m_norm(t)
        cut = M / t
        lo, hi = -a - lam, a - lam
        pieces = [(lo, min(hi, -cut)), (max(lo, -cut), min(hi, cut)),
                  (max(lo, cut), hi)]
        vals = []
        vals_re = []
        for plo, phi in pieces:
            if phi <= plo:
                vals.append(0.0 + 0.0j)
                vals_re.append(0.0 + 0.0j)
                continue
            nodes, wts = _panel_nodes(plo, phi, width, peak_scale=u)
            Av, _ = ev.A(u - 1j * nodes, rel_tol=quad_rel)
            phase = np.exp((u - 1j * nodes) * t)
            gv = kp.g(nodes + lam)
            vals.append(complex(np.sum(wts * gv * Av * phase)))
            vals_re.append(complex(np.sum(wts * gv * Av.real * phase)))
        I1 = vals[1]
        I2 = vals[0] + vals[2]
        total = I1 + I2
        total_re = vals_re[0] + vals_re[1] + vals_re[2]
        tgt = math.pi * rep.d_p_exact * float(kp.g(lam))
        rows.append(FgaRow(
            t=float(t), M=M, value=m_t * total, value_re_A=m_t * total_re,
            I1=m_t * I1, I2=m_t * I2, m_t=m_t,
            target=tgt, target_full=2.0 * tgt,
            m_I2_abs=abs(m_t * I2)))
    return rows


def tent_hat(s):
    """Laplace transform of the unit tent on [-1, 1]: (e^s + e^-s - 2)/s^2."""
    s = complex(s)
    if abs(s) < 1e-6:
        return complex(1.0 + s * s / 12.0)
    return (cmath.exp(s) + cmath.exp(-s) - 2.0) / (s * s)


@dataclass
class TentRow:
    s: float
    lhs: complex
    rhs: complex
    residual: float
    budget: float

    @property
    def ok(self):
        return self.residual <= self.budget


def tent_laplace_check(model, taus, s_grid, grid_h=0.05, z_score=4.0):
    """E[e^{-s tau}] = g_0(s) * int_0^inf Mhat(t) e^{-s t} dt with the tent
    smoother Mhat(t) = E[omega(t - tau)], omega the unit tent (Lipschitz 1).

    The right side is assembled from the gridded empirical Mhat and a
    trapezoid rule, so the check exercises the smoothing route rather than
    collapsing to the closed-form identity.
    """
    taus = np.asarray(taus, dtype=float)
    rows = []
    for s in s_grid:
        s = float(s)
        if s <= 0.0:
            raise ValueError("Re s > 0 required")
        lhs_vals = np.exp(-s * taus)
        lhs = complex(lhs_vals.mean())
        se = float(lhs_vals.std(ddof=1) / math.sqrt(taus.size))
        rhs, rhs2 = [
            _tent_rhs(taus, s, h) for h in (grid_h, grid_h / 2.0)]
        residual = abs(lhs - rhs2)
        budget = z_score * se + 2.0 * abs(rhs - rhs2)
        rows.append(TentRow(s=s, lhs=lhs, rhs=rhs2, residual=residual,
                            budget=budget))
    return rows


def _tent_rhs(taus, s, h):
    T = min(60.0 / s + taus.min(), float(taus.max()) + 2.0)
    grid = np.arange(0.0, T, h)
    M = np.zeros(grid.size)
    base = np.floor((taus - 1.0) / h).astype(np.int64) + 1
    for k in range(int(2.0 / h) + 1):
        j = base + k
        valid = (j >= 0) & (j < grid.size)
        w = 1.0 - np.abs(grid[j[valid]] - taus[valid])
        w = np.where(w > 0.0, w, 0.0)
        np.add.at(M, j[valid], w)
    M /= taus.size
    integrand = M * np.exp(-s * grid)
    integral = float(np.trapezoid(integrand, dx=h))
    g0 = 1.0 / tent_hat(s)
    return complex(g0 * integral)


@dataclass
class WindowRow:
    t: float
    lo: float
    hi: float
    mu_t_I: float
    target: float
    ratio: float


def interval_window_check(model, hist, t_values=None,
                     windows=((0.0, 1.0), (0.0, 0.5), (0.5, 1.0), (0.0, 2.0))):
    """mu_t(I) = m(t) * nu0_hat(I + t) against d_p * |I| for several I:
    the empirical realization of the interval-limit harness."""
    from .spectral import compute_constants
    consts = model.constants
    d_p = compute_constants(model).d_p_exact
    t_values = t_values if t_values is not None else hist.anchors[[0, 8, 16]]
    rows = []
    for t in t_values:
        j = int(np.argmin(np.abs(hist.anchors - t)))
        m_t = consts.m_norm(hist.anchors[j])
        for lo, hi in windows:
            qlo = int(round(lo / 0.25))
            qhi = int(round(hi / 0.25))
            nu0 = float(hist.sub_tau[j, qlo:qhi].sum()) / hist.n_total
            val = m_t * nu0
            tgt = d_p * (hi - lo)
            rows.append(WindowRow(t=float(hist.anchors[j]), lo=lo, hi=hi,
                                  mu_t_I=val, target=tgt,
                                  ratio=val / tgt if tgt else float("nan")))
    return rows
