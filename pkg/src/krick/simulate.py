"""Monte-Carlo estimation for the induced first-return system.

Excursions of the displacement walk are simulated until they return to 0 (or
hit a duration/step cap, in which case they are counted and reported, never
dropped).  The accumulators expose the survival function of the return
duration tau, unit-window masses mu(t <= tau < t+1) together with their
weighted companions (the measure with density x against tau), tent-smoothed
values, and the running integral m(t) = int_0^t mu(tau > x) dx.

Rescaled columns are normalized with the model's ``ell_star`` (the inverse
of x -> x**p / ell_p(x)); the survival statistic is compared against
p*sin(pi/p)*(r*)^(1-1/p)/Gamma(1/p).  A second pair of columns carries the
frequency-scale normalization ``ell_star_tail``, under which the limits
depend only on (p, r*); see the README for how the two relate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine, philox
from .model import return_tail_target

DEFAULT_ANCHORS = 10.0 ** (2.0 + np.arange(17) / 8.0)
DEFAULT_EDGES = 10.0 ** (np.arange(33) / 8.0)
N_SUB = 16
SUB_W = 0.25
DEFAULT_STEP_CAP = 10 ** 8


def wilson_ci(k, n, z=1.96):
    if n <= 0:
        return 0.0, 1.0
    ph = k / n
    den = 1.0 + z * z / n
    center = (ph + z * z / (2 * n)) / den
    hw = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(center - hw, 0.0), min(center + hw, 1.0)


def loglog_fit(x, y):
    """Least-squares slope/intercept of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


@dataclass
class Excursion:
    steps: int
    tau: float
    status: str                      # returned | censored | capped
    first_symbol: tuple
    last_symbol: tuple

    @property
    def returned(self):
        return self.status == "returned"


_STATUS = {0: "returned", 1: "censored", 2: "capped"}


def run_excursion(model, unit=0, seed=0, stream=philox.STREAM_TAIL,
                  cap=DEFAULT_STEP_CAP, tau_stop=float("inf"), backend=None):
    """Single excursion through the kernel path (mostly for tests/doc)."""
    if cap < 2:
        raise ValueError("step cap must allow at least the minimal excursion")
    be = engine.get_backend(backend)
    out = be.sample_kernel(spec=model.law.kernel_spec(), seed=int(seed),
                           stream=int(stream), unit_lo=int(unit),
                           unit_hi=int(unit) + 1, tau_stop=tau_stop,
                           step_cap=cap)
    return Excursion(
        steps=int(out["steps"][0]), tau=float(out["tau"][0]),
        status=_STATUS[int(out["status"][0])],
        first_symbol=(int(out["first_eps"][0]), int(out["first_n"][0])),
        last_symbol=(int(out["last_eps"][0]), int(out["last_n"][0])),
    )


@dataclass
class TailHistogram:
    """Pooled excursion accumulator (see module docstring)."""
    edges: np.ndarray
    counts: np.ndarray               # per [E_k, E_{k+1}) plus overflow
    anchors: np.ndarray
    sub_counts: np.ndarray           # (J, N_SUB) sub-unit windows
    sub_tau: np.ndarray              # tau-weighted versions of the above
    tent: np.ndarray                 # sum of tent weights at each anchor
    m_sums: np.ndarray               # sum of min(tau, t_j)
    n_total: int
    n_returned: int
    n_censored: int
    n_capped: int
    sum_steps: int
    sub_w: float = SUB_W
    store: dict = field(default_factory=dict, repr=False)

    # survival ---------------------------------------------------------------
    def survival(self):
        """mu_hat(tau >= E_k) for every edge."""
        tail_counts = np.cumsum(self.counts[::-1])[::-1]
        return tail_counts[:-1] / self.n_total, tail_counts[:-1]

    def survival_at(self, t):
        k = int(np.searchsorted(self.edges, t))
        if not math.isclose(self.edges[k], t, rel_tol=1e-12):
            raise ValueError(f"{t} is not a survival edge")
        surv, raw = self.survival()
        return float(surv[k]), int(raw[k])

    # anchored windows ---------------------------------------------------------
    def window_count(self, j, width=1.0):
        nsub = int(round(width / self.sub_w))
        return int(self.sub_counts[j, :nsub].sum())

    def window_mass(self, j, width=1.0):
        return self.window_count(j, width) / self.n_total

    def nu0_window(self, j, width=1.0):
        """Empirical mass of the x-weighted measure on [t_j, t_j + width)."""
        nsub = int(round(width / self.sub_w))
        return float(self.sub_tau[j, :nsub].sum()) / self.n_total

    def tent_value(self, j):
        return float(self.tent[j]) / self.n_total

    def m_hat(self, j):
        return float(self.m_sums[j]) / self.n_total

    @property
    def capped_fraction(self):
        return self.n_capped / max(self.n_total, 1)

    @property
    def censored_fraction(self):
        return self.n_censored / max(self.n_total, 1)

    def sandwich_ok(self):
        """t * mu(t<tau<t+1) <= nu0([t,t+1]) <= (t+1) * mu(t<tau<t+1),
        which holds sample-by-sample for the paired accumulators."""
        for j, t in enumerate(self.anchors):
            lo = t * self.window_mass(j)
            hi = (t + 1.0) * self.window_mass(j)
            mid = self.nu0_window(j)
            if not (lo <= mid + 1e-12 and mid <= hi + 1e-12):
                return False
        return True



def estimate_tail_histogram(model, trials, seed, workers=1, backend=None,
                            anchors=None, edges=None, tau_stop=None,
                            step_cap=DEFAULT_STEP_CAP, store=0,
                            stream=philox.STREAM_TAIL, sub_w=SUB_W):
    anchors = np.asarray(DEFAULT_ANCHORS if anchors is None else anchors,
                         dtype=float)
    edges = np.asarray(DEFAULT_EDGES if edges is None else edges, dtype=float)
    if np.any(np.diff(anchors) <= N_SUB * sub_w):
        raise ValueError("anchors closer than the sub-window span")
    if tau_stop is None:
        tau_stop = float(max(anchors.max() + N_SUB * sub_w + 2.0,
                             edges.max()))
    if step_cap < tau_stop:
        raise ValueError("step_cap below tau_stop would bias the tail bins")
    out = engine.run_kernel(
        "tail_kernel", trials, workers=workers, backend=backend,
        spec=model.law.kernel_spec(), seed=int(seed), stream=int(stream),
        tau_stop=float(tau_stop), step_cap=int(step_cap), edges=edges,
        anchors=anchors, n_sub=N_SUB, sub_w=float(sub_w), store_upto=int(store))
    return TailHistogram(
        edges=edges, counts=out["counts"], anchors=anchors,
        sub_counts=out["sub_counts"], sub_tau=out["sub_tau"],
        tent=out["tent"], m_sums=out["m_sums"], n_total=out["n_total"],
        n_returned=out["n_returned"], n_censored=out["n_censored"],
        n_capped=out["n_capped"], sum_steps=out["sum_steps"],
        sub_w=float(sub_w), store=out["store"])


@dataclass
class TailRow:
    t: float
    estimate: float
    ci_low: float
    ci_high: float
    rescaled: float              # estimate * t^(1-1/p) * ell_star(t)
    target: float
    rescaled_freq: float         # same with ell_star_tail (freq. scale)
    flagged: bool


def tau_tail_rows(model, hist, fit_range=(1e2, 1e4)):
    """Survival rows with rescaled statistic, plus the log-log slope fit."""
    consts = model.constants
    target = return_tail_target(consts)
    surv, _ = hist.survival()
    rows = []
    for k, t in enumerate(hist.edges[:-1]):
        est = float(surv[k])
        lo, hi = wilson_ci(est * hist.n_total, hist.n_total)
        base = est * t ** (1.0 - 1.0 / model.params.p)
        flagged = (hi - lo) > max(est, 1e-300)
        rows.append(TailRow(t=float(t), estimate=est, ci_low=lo, ci_high=hi,
                            rescaled=base * consts.ell_star(t), target=target,
                            rescaled_freq=base * consts.ell_star_tail(t),
                            flagged=flagged))
    sel = [r for r in rows
           if fit_range[0] <= r.t <= fit_range[1] and r.estimate > 0]
    slope, _ = loglog_fit([r.t for r in sel], [r.estimate for r in sel])
    return rows, slope


@dataclass
class SmoothRow:
    t: float
    width: float
    mass: float                  # mu_hat(t <= tau < t + width) / width
    ci_low: float
    ci_high: float
    dp_hat: float
    dp_low: float
    dp_high: float
    nu0_ratio: float             # nu0([t,t+1]) / mu(t<tau<t+1), in [t, t+1]
    tent: float


def smooth_tail_rows(model, hist, wide_from=2000.0, width=None):
    """Per-anchor unit-window rows; anchors beyond ``wide_from`` use a wider
    window (still an estimator of the same limit, with O(width/t) bias) to
    keep the confidence interval useful at the largest anchor."""
    consts = model.constants
    p = model.params.p
    rows = []
    for j, t in enumerate(hist.anchors):
        if width is not None:
            width_t = float(width)
        else:
            width_t = 4.0 if t >= wide_from else 1.0
        k = hist.window_count(j, width_t)
        mass = k / hist.n_total / width_t
        lo, hi = wilson_ci(k, hist.n_total)
        lo /= width_t
        hi /= width_t
        scale = t ** (2.0 - 1.0 / p) * consts.ell_star(t)
        if hist.sub_w <= 0.26:
            unit_mass = hist.window_mass(j)
            nu0 = hist.nu0_window(j)
        else:
            unit_mass = mass * width_t
            nu0 = float("nan")
        rows.append(SmoothRow(
            t=float(t), width=width_t, mass=mass, ci_low=lo, ci_high=hi,
            dp_hat=mass * scale, dp_low=lo * scale, dp_high=hi * scale,
            nu0_ratio=nu0 / unit_mass if unit_mass > 0 else float("nan"),
            tent=hist.tent_value(j)))
    return rows


def smooth_tail_exponent(rows, fit_range=(1e2, 1e3)):
    sel = [r for r in rows if fit_range[0] <= r.t <= fit_range[1]
           and r.mass > 0 and r.width == 1.0]
    slope, _ = loglog_fit([r.t for r in sel], [r.mass for r in sel])
    return slope


@dataclass
class RenewalRow:
    t: float
    h: float
    increment: float
    ci_low: float
    ci_high: float
    v_increment: float           # symmetrized measure: half the increment
    rescaled: float
    target: float


def estimate_renewal(model, trials, A, B, t_grid, h=1.0, seed=0, workers=1,
                     backend=None, tail_ref=None):
    """Mean number of renewal epochs in (t, t+h] with the start symbol in A
    and the landing symbol in B, rescaled by ell_tau(t) * t^(1-beta)."""
    law = model.law
    A_ns = None if A is None else np.unique(np.asarray(A, dtype=np.int64))
    B_ns = None if B is None else np.unique(np.asarray(B, dtype=np.int64))
    for name, s in (("A", A_ns), ("B", B_ns)):
        if s is not None and (s.size == 0 or law.symbol_mass(s) <= 0):
            raise ValueError(f"symbol set {name} has zero measure")
    if h > 2.0:
        raise ValueError("window width h must be <= 2 (inf tau > 2 ensures "
                         "at most one renewal per window)")
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    out = engine.run_kernel(
        "renewal_kernel", trials, workers=workers, backend=backend,
        spec=law.kernel_spec(), seed=int(seed),
        stream=int(philox.STREAM_RENEWAL), t_grid=t_grid, h=float(h),
        A_ns=A_ns, B_ns=B_ns, step_cap=DEFAULT_STEP_CAP)
    muA = law.symbol_mass(A_ns) if A_ns is not None else 1.0
    muB = law.symbol_mass(B_ns) if B_ns is not None else 1.0
    if tail_ref is None and np.any(t_grid > 0):
        tail_ref = _companion_histogram(model, trials, t_grid, seed, workers,
                                        backend)
    beta = model.constants.beta
    rows = []
    for j, t in enumerate(t_grid):
        # U is normalized per unit of mu, i.e. per trial
        inc = out["hits"][j] / out["n_trials"]
        lo, hi = wilson_ci(out["hits"][j], out["n_trials"])
        if t > 0:
            surv_t, _ = _survival_lookup(tail_ref, t)
            ell_tau = t ** beta * surv_t
            resc = ell_tau * t ** (1.0 - beta) * inc
        else:
            resc = float("nan")
        rows.append(RenewalRow(
            t=float(t), h=h, increment=inc, ci_low=lo, ci_high=hi,
            v_increment=0.5 * inc, rescaled=resc,
            target=model_d_beta(model) * muA * muB * h))
    return rows, out


def model_d_beta(model):
    beta = model.constants.beta
    return math.sin(math.pi * beta) / math.pi


@dataclass
class MixingRow:
    t: float
    p_hat: float
    ci_low: float
    ci_high: float
    corr: float                  # mu^tau(A1 & flow_t^-1 B1)
    m_t: float
    product: float               # m(t) * corr
    target: float
    rel_dev: float


def estimate_flow_correlation(model, trials, A, B, interval_a=(0.0, 1.0),
                              interval_b=(0.0, 1.0), t_grid=(100.0, 1000.0),
                              seed=0, workers=1, backend=None, tail_ref=None):
    """Krickeberg product m(t) * mu^tau(A1 intersect flow_t^-1 B1).

    Start points are drawn from the normalized restriction of the suspension
    measure to A1 = A x [a1, a2]; the flow is realized by sweeping fresh
    excursion durations until the renewal sums bracket u + t.
    """
    law = model.law
    a1, a2 = interval_a
    b1, b2 = interval_b
    if not (0.0 <= a1 < a2 <= 1.0 and 0.0 <= b1 < b2 <= 1.0):
        raise ValueError("fiber intervals must satisfy 0 <= lo < hi <= 1 "
                         "(inf tau >= 2 keeps them under the roof)")
    A_ns = np.unique(np.asarray(A, dtype=np.int64))
    B_ns = np.unique(np.asarray(B, dtype=np.int64))
    if law.symbol_mass(A_ns) <= 0 or law.symbol_mass(B_ns) <= 0:
        raise ValueError("A and B must have positive measure")
    probs = law.prob_n(A_ns)
    cum = np.cumsum(probs / probs.sum())
    cum[-1] = 1.0
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    out = engine.run_kernel(
        "mixing_kernel", trials, workers=workers, backend=backend,
        spec=law.kernel_spec(), seed=int(seed),
        stream=int(philox.STREAM_MIXING), t_grid=t_grid,
        a1=float(a1), a2=float(a2), b1=float(b1), b2=float(b2),
        cumA_p=cum, cumA_n=A_ns, B_ns=B_ns, step_cap=DEFAULT_STEP_CAP)
    if tail_ref is None:
        tail_ref = _companion_histogram(model, trials, t_grid, seed, workers,
                                        backend)
    mu_A1 = law.symbol_mass(A_ns) * (a2 - a1)
    mu_B1 = law.symbol_mass(B_ns) * (b2 - b1)
    target = model_d_beta(model) * mu_A1 * mu_B1
    n_ok = out["n_trials"] - out["n_voided"]
    rows = []
    for j, t in enumerate(t_grid):
        ph = out["hits"][j] / n_ok
        lo, hi = wilson_ci(out["hits"][j], n_ok)
        ja = int(np.argmin(np.abs(tail_ref.anchors - t)))
        if not math.isclose(tail_ref.anchors[ja], t, rel_tol=1e-9):
            raise ValueError(f"t={t} must be one of the tail anchors for m(t)")
        m_t = tail_ref.m_hat(ja)
        corr = ph * mu_A1
        product = m_t * corr
        rows.append(MixingRow(
            t=float(t), p_hat=ph, ci_low=lo, ci_high=hi, corr=corr, m_t=m_t,
            product=product, target=target,
            rel_dev=abs(product - target) / target))
    return rows, out


def _companion_histogram(model, trials, t_grid, seed, workers, backend):
    """Independent iid excursion run sized to estimate m(t) and the
    survival at exactly the requested epochs."""
    ts = np.asarray([t for t in np.atleast_1d(t_grid) if t >= 2.0])
    if ts.size and np.all(np.diff(ts) > N_SUB * SUB_W):
        anchors = ts
    else:
        anchors = None
    edges = np.unique(np.concatenate([
        DEFAULT_EDGES[DEFAULT_EDGES <= max(float(np.max(t_grid)), 10.0) * 1.3],
        ts if ts.size else [10.0]]))
    return estimate_tail_histogram(
        model, max(10 ** 5, min(trials, 10 ** 6)), seed=seed,
        workers=workers, backend=backend, anchors=anchors, edges=edges,
        stream=philox.STREAM_MIXING_M)


def _survival_lookup(hist, t):
    surv, raw = hist.survival()
    k = int(np.argmin(np.abs(hist.edges[:-1] - t)))
    if not math.isclose(hist.edges[k], t, rel_tol=1e-9):
        raise ValueError(f"t={t} not among the survival edges")
    return float(surv[k]), int(raw[k])


def excursion_sample(model, n, seed=0, workers=1, backend=None,
                     tau_stop=3e4, stream=philox.STREAM_STORE):
    """Raw iid excursion store for the weighted-measure & Laplace checks.

    Durations are censored at tau_stop; every Laplace-type use site damps
    with exp(-u*tau) at u >= 1e-3, making the censored contribution
    below ~exp(-u*tau_stop) ~ 1e-13 of the total.
    """
    out = engine.run_kernel(
        "sample_kernel", n, workers=workers, backend=backend,
        spec=model.law.kernel_spec(), seed=int(seed), stream=int(stream),
        tau_stop=float(tau_stop), step_cap=DEFAULT_STEP_CAP)
    return out
