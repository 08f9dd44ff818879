"""Countable-alphabet Bernoulli model with exact heavy tails.

The base map is a full shift on symbols (eps, n), eps = +-1, n >= 1, drawn
i.i.d. with

    prob(eps, n) = (T(n) - T(n+1)) / 2,      T(n) = ellbar(n) * n**-p,  T(1) = 1,

so the two-sided displacement tail is exact by construction:
mu(|phi| > t) = T(floor(t)+1) for every t >= 0.  The observables are

    phi(eps, n) = eps * n            (integer displacement, mean zero)
    r(+, n)     = n + xi,  r(-, n) = 1   (roof; inf r = 1, E r < infinity)

with xi irrational so that (r, phi) generates no lattice relation.  The
induced first-return quantities (N, tau) of the phi-walk then have
regularly varying tails with index 1 - 1/p, which is what the rest of the
package measures and cross-checks.

Two slowly-varying normalizers are exposed, because the published tail laws
are stated against the inverse of the *full* characteristic-function symbol
c_p * ell(1/theta) * |theta|^p, while the hypothesis text normalizes ell_p
alone.  ``ell_star`` inverts x -> x**p / ell_p(x) (hypothesis convention);
``ell_star_tail`` inverts x -> x**p / (c_p * ell_p(x)) and is the
normalization under which the first-return tail constant depends only on
(p, E r).  Both are computed by bisection with guarded brackets.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import zeta as zeta_fn

XI_CONSTANTS = {
    "sqrt2-1": math.sqrt(2.0) - 1.0,
    "sqrt3-1": math.sqrt(3.0) - 1.0,
    "1/pi": 1.0 / math.pi,
    "zero": 0.0,  # lattice roof: violates joint aperiodicity, negative control
}

NTAB = 65536          # exact inverse-CDF table covers n <= NTAB
GUIDE_BITS = 12       # 4096-bucket guide table over the uniform variate


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    p: float = 1.5
    xi_tag: str = "sqrt2-1"
    ell_kind: str = "constant"   # "constant" | "log-power"
    kappa: float = 0.0

    def validate(self, allow_lattice_roof=False):
        if not (1.0 < self.p <= 2.0):
            raise ModelError(f"tail index p must lie in (1, 2], got {self.p}")
        if self.xi_tag not in XI_CONSTANTS:
            raise ModelError(f"unknown xi_tag {self.xi_tag!r}; "
                             f"choose from {sorted(XI_CONSTANTS)}")
        if self.xi_tag == "zero" and not allow_lattice_roof:
            raise ModelError("xi_tag='zero' gives an integer-valued roof and "
                             "breaks aperiodicity; it is only allowed for the "
                             "negative-control scan")
        if self.ell_kind not in ("constant", "log-power"):
            raise ModelError(f"unknown ell_kind {self.ell_kind!r}")
        if self.ell_kind == "constant" and self.kappa != 0.0:
            raise ModelError("kappa is only meaningful for ell_kind='log-power'")
        if self.ell_kind == "log-power" and self.kappa >= self.p:
            # T(n) = (1+ln n)^kappa n^-p needs kappa < p(1+ln n) for all n>=1
            raise ModelError(
                f"log-power kappa={self.kappa} makes T non-monotone near n=1 "
                f"(requires kappa < p = {self.p})")

    @property
    def xi(self):
        return XI_CONSTANTS[self.xi_tag]

    @property
    def gamma_exponent(self):
        """Error exponent in the roof-tail comparison, p + 1 > 2 here."""
        return self.p + 1.0

    def to_dict(self):
        return {"p": self.p, "xi_tag": self.xi_tag,
                "ell_kind": self.ell_kind, "kappa": self.kappa}

    @staticmethod
    def from_dict(d):
        return ModelParams(p=float(d["p"]), xi_tag=d.get("xi_tag", "sqrt2-1"),
                           ell_kind=d.get("ell_kind", "constant"),
                           kappa=float(d.get("kappa", 0.0)))


class SymbolLaw:
    """Per-symbol law with exact-by-construction tails and sampling tables."""

    def __init__(self, params, allow_lattice_roof=False):
        params.validate(allow_lattice_roof=allow_lattice_roof)
        self.params = params
        self.p = params.p
        self.xi = params.xi
        self.kappa = params.kappa
        self.constant_ell = params.ell_kind == "constant"
        # T(n) for n = 1 .. NTAB+1 in doubles; the sampler and all exact
        # tail formulas share this array so they agree bit-for-bit.
        ns = np.arange(1, NTAB + 2, dtype=np.float64)
        self.Tvals = self.T(ns)
        if not np.all(np.diff(self.Tvals) < 0.0):
            raise ModelError("tail function T is not strictly decreasing")
        self.tail_threshold = float(self.Tvals[-1])   # T(NTAB+1)
        self._build_guide()

    # tail-first construction -------------------------------------------------
    def T(self, n):
        """Two-sided tail mu(|phi| >= n), exact for integer n >= 1."""
        n = np.asarray(n, dtype=np.float64)
        if self.constant_ell:
            return n ** (-self.p)
        return (1.0 + np.log(n)) ** self.kappa * n ** (-self.p)

    def prob_n(self, n):
        """mu(|phi| = n) = T(n) - T(n+1)."""
        n = np.asarray(n, dtype=np.float64)
        return self.T(n) - self.T(n + 1.0)

    def prob(self, eps, n):
        return 0.5 * self.prob_n(n)

    @staticmethod
    def phi(eps, n):
        return eps * n

    def r(self, eps, n):
        n = np.asarray(n, dtype=np.float64)
        return np.where(np.asarray(eps) > 0, n + self.xi, 1.0)

    def tail_phi(self, t):
        """mu(phi > t) = mu(phi < -t), one-sided."""
        t = np.asarray(t, dtype=np.float64)
        return 0.5 * self.T(np.floor(np.maximum(t, 0.0)) + 1.0)

    def tail_abs_phi(self, t):
        return 2.0 * self.tail_phi(t)

    def tail_r(self, t):
        """mu(r > t); exact. inf r = 1, so this is 1 for t < 1."""
        t = np.asarray(t, dtype=np.float64)
        n_min = np.floor(t - self.xi) + 1.0
        # guard the floor against float slop at lattice points
        n_min = np.where(n_min + self.xi <= t, n_min + 1.0, n_min)
        n_min = np.maximum(n_min, 1.0)
        out = 0.5 * self.T(n_min) + 0.5 * (t < 1.0)
        return np.where(t < 1.0, 1.0, out)

    def symbol_mass(self, ns):
        """mu(first symbol has n in ns), both signs."""
        ns = np.asarray(ns, dtype=np.float64)
        return float(np.sum(self.prob_n(ns)))

    # sampling tables ----------------------------------------------------------
    def _build_guide(self):
        G = 1 << GUIDE_BITS
        # n(v) = max{n : T(n) >= v} is nonincreasing in v; per guide bucket we
        # store the n-range so lookup is a short bounded binary search.
        edges = np.arange(G + 1, dtype=np.float64) / G
        # number of n in 1..NTAB+1 with T(n) >= v  ==  n(v) clipped to table
        negT = -self.Tvals
        nv = np.searchsorted(negT, -edges, side="right").astype(np.int64)
        nv = np.clip(nv, 1, NTAB + 1)
        self.guide_hi = np.maximum(nv[:-1], 1).astype(np.int64)   # at left edge
        self.guide_lo = np.maximum(nv[1:], 1).astype(np.int64)    # at right edge
        self.guide_bits = GUIDE_BITS

    def invert_tail_continuous(self, v):
        """Real x >= 1 with T(x) = v, for the analytic tail path (v small)."""
        if self.constant_ell:
            return v ** (-1.0 / self.p)
        # Newton on log T(x) = log v starting from the pure power-law guess
        x = v ** (-1.0 / self.p)
        for _ in range(60):
            lx = math.log(x)
            f = self.kappa * math.log1p(lx) - self.p * lx - math.log(v)
            df = (self.kappa / (1.0 + lx) - self.p) / x
            step = f / df
            x_new = x - step
            if x_new <= 1.0:
                x_new = 0.5 * (x + 1.0)
            if abs(x_new - x) <= 1e-14 * x:
                x = x_new
                break
            x = x_new
        return x

    def sample_n(self, v):
        """n = max{n >= 1: T(n) >= v} for v in (0, 1]; scalar, exact."""
        if v >= self.tail_threshold:
            g = min(int(v * (1 << self.guide_bits)), (1 << self.guide_bits) - 1)
            lo = self.guide_lo[g]
            hi = self.guide_hi[g]
            while lo < hi:                      # largest n with T(n) >= v
                mid = (lo + hi + 1) >> 1
                if self.Tvals[mid - 1] >= v:
                    lo = mid
                else:
                    hi = mid - 1
            return int(lo)
        n = int(self.invert_tail_continuous(v))
        n = max(n, NTAB + 1)
        while self.T(n + 1.0) >= v:
            n += 1
        while n > NTAB + 1 and self.T(float(n)) < v:
            n -= 1
        return n

    def kernel_spec(self):
        """Plain-array description consumed by the simulation kernels."""
        return {
            "mode": 0 if self.constant_ell else 1,
            "p": self.p,
            "xi": self.xi,
            "kappa": self.kappa,
            "Tvals": self.Tvals,
            "guide_lo": self.guide_lo,
            "guide_hi": self.guide_hi,
            "guide_bits": self.guide_bits,
            "tail_threshold": self.tail_threshold,
        }


@dataclass
class DerivedConstants:
    r_star: float
    r_star_err: float
    c_ell: float
    beta: float
    gamma: float
    c_p: float
    sum_T: float
    params: ModelParams = field(repr=False)

    def ell(self, t):
        """Slowly varying part of the one-sided phi-tail."""
        t = np.asarray(t, dtype=np.float64)
        if self.params.ell_kind == "constant":
            return np.full_like(t, self.c_ell)
        return self.c_ell * (1.0 + np.log(t)) ** self.params.kappa

    def ell_p(self, y):
        """ell for p < 2; the integrated variant 2 * int_1^y ell(x)/x dx at p = 2."""
        y = np.asarray(y, dtype=np.float64)
        p, kappa = self.params.p, self.params.kappa
        if p < 2.0:
            return self.ell(y)
        if self.params.ell_kind == "constant":
            return 2.0 * self.c_ell * np.log(y)
        return 2.0 * self.c_ell * ((1.0 + np.log(y)) ** (kappa + 1.0) - 1.0) / (kappa + 1.0)

    def _invert(self, t, include_cp):
        """x >= x0 with x**p / (c * ell_p(x)) = t, by bracketed bisection."""
        p = self.params.p
        c = self.c_p if include_cp else 1.0

        def f(x):
            return x ** p / (c * float(self.ell_p(x)))

        x_lo = 1.0 + 1e-9 if p < 2.0 else math.e      # ell_2(1) = 0
        f_lo = f(x_lo)
        t = max(t, f_lo * (1.0 + 1e-12))
        x_hi = max(2.0 * x_lo, t ** (1.0 / p) * 2.0)
        for _ in range(200):
            if f(x_hi) >= t:
                break
            x_hi *= 2.0
        else:
            raise ModelError("ell_star bracket did not close after 200 doublings")
        for _ in range(200):
            x_mid = math.sqrt(x_lo * x_hi)
            if f(x_mid) < t:
                x_lo = x_mid
            else:
                x_hi = x_mid
            if x_hi - x_lo <= 1e-9 * x_lo:
                break
        return 0.5 * (x_lo + x_hi)

    def ell_star(self, t):
        """Slowly varying part of the inverse of x -> x**p / ell_p(x).

        Small arguments are reflected (ell*(w) := ell*(1/w) reading), so one
        formula serves both the composition identity at small s and the
        t -> infinity tail laws.  Constant family: c_ell**(1/p).
        """
        t = float(t)
        if t <= 0.0:
            raise ModelError("ell_star argument must be positive")
        t_eff = t if t >= 1.0 else 1.0 / t
        x = self._invert(t_eff, include_cp=False)
        return x * t_eff ** (-1.0 / self.params.p)

    def ell_star_tail(self, t):
        """Slowly varying part of the frequency-scale function: theta(w)
        solving c_p * ell_p(1/theta) * theta**p = w, written as
        theta = ell_star_tail(1/w) * w**(1/p).  This is the normalization
        under which the return-tail constants depend only on (p, E r).
        Constant family: (c_p * c_ell)**(-1/p)."""
        t = float(t)
        if t <= 0.0:
            raise ModelError("ell_star_tail argument must be positive")
        t_eff = t if t >= 1.0 else 1.0 / t
        x = self._invert(t_eff, include_cp=True)   # x = 1/theta(1/t_eff)
        return t_eff ** (1.0 / self.params.p) / x

    def m_norm(self, t):
        """Normalizer t^(1-1/p) * ell_star(t) used by the inversion harness,
        chosen so that m_norm(t) * nu0([t,t+1]) and the unit-window d_p
        estimator share one limit."""
        return t ** (1.0 - 1.0 / self.params.p) * self.ell_star(t)

    def to_dict(self):
        return {
            "r_star": self.r_star, "r_star_err": self.r_star_err,
            "c_ell": self.c_ell, "beta": self.beta, "gamma": self.gamma,
            "c_p": self.c_p, "sum_T": self.sum_T,
        }


@dataclass
class Model:
    params: ModelParams
    law: SymbolLaw
    constants: DerivedConstants


def c_p_constant(p):
    """Characteristic-function coefficient: E[1 - cos(theta*phi)] ~
    c_p * ell(1/theta) * theta^p.  2*Gamma(1-p)*cos(pi p/2) for p in (1,2)
    (both factors negative), and 1/2 at the p = 2 boundary."""
    if p == 2.0:
        return 0.5
    return 2.0 * gamma_fn(1.0 - p) * math.cos(math.pi * p / 2.0)


def _sum_T(law):
    """sum_{n>=1} T(n) by direct summation plus an Euler-Maclaurin tail with
    a bracketing error bound (monotone integrand)."""
    N = 1 << 17
    ns = np.arange(1, N + 1, dtype=np.float64)
    head = float(np.sum(law.T(ns)))
    p, kappa = law.p, law.kappa

    def g(x):
        if law.constant_ell:
            return x ** (-p)
        return (1.0 + math.log(x)) ** kappa * x ** (-p)

    def g_int(x):       # int_x^inf g, closed form for constant ell
        if law.constant_ell:
            return x ** (1.0 - p) / (p - 1.0)
        from scipy.integrate import quad
        val, _ = quad(lambda u: g(1.0 / u) / u ** 2, 0.0, 1.0 / x,
                      epsabs=1e-13, epsrel=1e-11, limit=500)
        return val

    def g1(x):          # g'
        if law.constant_ell:
            return -p * x ** (-p - 1.0)
        lx = math.log(x)
        return x ** (-p - 1.0) * (1.0 + lx) ** (kappa - 1.0) * (kappa - p * (1.0 + lx))

    # Euler-Maclaurin: sum_{n>N} g(n) = int_N^inf g - g(N)/2 - g'(N)/12 + err
    tail = g_int(float(N)) - 0.5 * g(float(N)) - g1(float(N)) / 12.0
    err = abs(g1(float(N))) / 12.0 * 1e-3 + 1e-14 * head   # next EM term is tiny
    return head + tail, err


def build_model(params, allow_lattice_roof=False):
    """Construct the symbol law and its derived constants.

    r_star = E[r] = (sum_T + xi + 1) / 2 by Abel summation; for the constant
    family sum_T is zeta(p) and the series route is cross-checked against it.
    """
    law = SymbolLaw(params, allow_lattice_roof=allow_lattice_roof)
    sum_T, err = _sum_T(law)
    if law.constant_ell:
        z = float(zeta_fn(params.p))
        if abs(z - sum_T) > max(1e-10, 10 * err):
            raise ModelError(f"series for sum T disagrees with zeta: {sum_T} vs {z}")
        sum_T, err = z, 1e-15
    r_star = 0.5 * (sum_T + params.xi + 1.0)
    c_ell = 0.5   # one-sided tail: mu(phi > t) = T(floor t + 1)/2
    constants = DerivedConstants(
        r_star=r_star, r_star_err=0.5 * err, c_ell=c_ell,
        beta=1.0 - 1.0 / params.p, gamma=params.gamma_exponent,
        c_p=c_p_constant(params.p), sum_T=sum_T, params=params,
    )
    return Model(params=params, law=law, constants=constants)


def ell_star(constants, t):
    """Module-level convenience mirroring the op surface."""
    return constants.ell_star(t)


def return_tail_target(constants):
    """p*sin(pi/p)*(r*)^(1-1/p) / Gamma(1/p): the limit of
    mu(tau > t) * t^(1-1/p) * ell_star_tail(t)."""
    p = constants.params.p
    return (p * math.sin(math.pi / p) * constants.r_star ** (1.0 - 1.0 / p)
            / gamma_fn(1.0 / p))
