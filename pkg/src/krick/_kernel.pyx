# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Same contract as ``_kernel_py``: counter-based Philox substreams per
(unit, channel), in-table inverse-CDF sampling against the shared Tvals
array, libm pow on the analytic tail path, per-bin accumulation in
ascending unit order.  Output is bit-identical to the fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, log, log1p, pow

cnp.import_array()

cdef extern from *:
    """
    typedef unsigned __int128 uint128_t;
    """
    ctypedef unsigned long long uint128_t

ctypedef unsigned long long u64
ctypedef long long i64

DEF NTAB = 65536

cdef u64 M0 = 0xD2E7470EE14C6C93ULL
cdef u64 M1 = 0xCA5A826395121157ULL
cdef u64 W0 = 0x9E3779B97F4A7C15ULL
cdef u64 W1 = 0xBB67AE8584CAA73BULL

cdef double INV53 = 1.0 / 9007199254740992.0   # 2^-53


# ---------------------------------------------------------------- philox ----

cdef inline void _philox(u64 c0, u64 c1, u64 c2, u64 c3, u64 k0, u64 k1,
                         u64* out) noexcept nogil:
    cdef int r
    cdef uint128_t p0, p1
    cdef u64 hi0, lo0, hi1, lo1
    for r in range(10):
        p0 = <uint128_t> M0 * c0
        p1 = <uint128_t> M1 * c2
        hi0 = <u64> (p0 >> 64)
        lo0 = <u64> p0
        hi1 = <u64> (p1 >> 64)
        lo1 = <u64> p1
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + W0
        k1 = k1 + W1
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


cdef struct Stream:
    u64 seed
    u64 stream
    u64 unit
    u64 channel
    u64 block
    int pos
    double buf[4]


cdef inline void stream_init(Stream* st, u64 seed, u64 stream, u64 unit,
                             u64 channel) noexcept nogil:
    st.seed = seed
    st.stream = stream
    st.unit = unit
    st.channel = channel
    st.block = 0
    st.pos = 4


cdef inline double next_double(Stream* st) noexcept nogil:
    cdef u64 words[4]
    cdef int i
    if st.pos == 4:
        _philox(st.block, st.unit, st.channel, 0ULL, st.seed, st.stream, words)
        for i in range(4):
            st.buf[i] = <double> (words[i] >> 11) * INV53
        st.block += 1
        st.pos = 0
    st.pos += 1
    return st.buf[st.pos - 1]


# --------------------------------------------------------------- sampler ----

cdef struct Spec:
    int mode
    double p
    double xi
    double kappa
    double thr
    int guide_bits
    const double* Tvals
    const i64* guide_lo
    const i64* guide_hi


cdef inline double _T_scalar(Spec* sp, double n) noexcept nogil:
    if sp.mode == 0:
        return pow(n, -sp.p)
    return pow(1.0 + log(n), sp.kappa) * pow(n, -sp.p)


cdef inline i64 _sample_n_tail(Spec* sp, double v) noexcept nogil:
    cdef double x, lx, f, df, x_new
    cdef i64 n
    cdef int it
    if sp.mode == 0:
        x = pow(v, -1.0 / sp.p)
    else:
        x = pow(v, -1.0 / sp.p)
        for it in range(60):
            lx = log(x)
            f = sp.kappa * log1p(lx) - sp.p * lx - log(v)
            df = (sp.kappa / (1.0 + lx) - sp.p) / x
            x_new = x - f / df
            if x_new <= 1.0:
                x_new = 0.5 * (x + 1.0)
            if fabs(x_new - x) <= 1e-14 * x:
                x = x_new
                break
            x = x_new
    n = <i64> x
    if n < NTAB + 1:
        n = NTAB + 1
    while _T_scalar(sp, <double> (n + 1)) >= v:
        n += 1
    while n > NTAB + 1 and _T_scalar(sp, <double> n) < v:
        n -= 1
    return n


cdef inline i64 sample_n(Spec* sp, double v) noexcept nogil:
    cdef i64 lo, hi, mid
    cdef int g
    if v >= sp.thr:
        g = <int> (v * (1 << sp.guide_bits))
        if g > (1 << sp.guide_bits) - 1:
            g = (1 << sp.guide_bits) - 1
        lo = sp.guide_lo[g]
        hi = sp.guide_hi[g]
        while lo < hi:
            mid = (lo + hi + 1) >> 1
            if sp.Tvals[mid - 1] >= v:
                lo = mid
            else:
                hi = mid - 1
        return lo
    return _sample_n_tail(sp, v)


# ------------------------------------------------------------- excursion ----

cdef struct Exc:
    double tau
    i64 steps
    int status            # 0 returned, 1 tau-censored, 2 step-capped
    i64 first_n
    int first_eps
    i64 last_n
    int last_eps


cdef inline void run_excursion(Spec* sp, Stream* st, double tau_stop,
                               i64 step_cap, i64 init_n, int init_eps,
                               Exc* out) noexcept nogil:
    cdef i64 q = 0, steps = 0, n
    cdef double tau = 0.0, u1, u2, v
    cdef int eps
    out.first_n = 0
    out.first_eps = 0
    if init_n > 0:
        q = (<i64> init_eps) * init_n
        tau = init_n + sp.xi if init_eps > 0 else 1.0
        steps = 1
        out.first_n = init_n
        out.first_eps = init_eps
        out.last_n = init_n
        out.last_eps = init_eps
        if tau > tau_stop:
            out.tau = tau
            out.steps = steps
            out.status = 1
            return
    while True:
        u1 = next_double(st)
        u2 = next_double(st)
        v = 1.0 - u1
        n = sample_n(sp, v)
        eps = 1 if u2 < 0.5 else -1
        q += (<i64> eps) * n
        tau += n + sp.xi if eps > 0 else 1.0
        steps += 1
        if steps == 1:
            out.first_n = n
            out.first_eps = eps
        out.last_n = n
        out.last_eps = eps
        if q == 0:
            out.status = 0
            break
        if tau > tau_stop:
            out.status = 1
            break
        if steps >= step_cap:
            out.status = 2
            break
    out.tau = tau
    out.steps = steps


cdef inline void spec_from_views(Spec* sp, int mode, double p, double xi,
                                 double kappa, double thr, int guide_bits,
                                 const double[::1] Tvals,
                                 const i64[::1] guide_lo,
                                 const i64[::1] guide_hi) noexcept:
    sp.mode = mode
    sp.p = p
    sp.xi = xi
    sp.kappa = kappa
    sp.thr = thr
    sp.guide_bits = guide_bits
    sp.Tvals = &Tvals[0]
    sp.guide_lo = &guide_lo[0]
    sp.guide_hi = &guide_hi[0]


cdef inline i64 _bin_le(const double[::1] arr, double x) noexcept nogil:
    """Last index i with arr[i] <= x, or -1 (== searchsorted right - 1)."""
    cdef i64 lo = -1, hi = arr.shape[0] - 1, mid
    if arr[0] > x:
        return -1
    lo = 0
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if arr[mid] <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


cdef inline i64 _first_gt(const double[::1] arr, double x) noexcept nogil:
    """First index i with arr[i] > x, or len(arr)."""
    cdef i64 lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] > x:
            hi = mid
        else:
            lo = mid + 1
    return lo


def backend_name():
    return "cython"


def tail_kernel(spec, seed, stream, unit_lo, unit_hi, tau_stop, step_cap,
                edges, anchors, n_sub, sub_w, store_upto, batch=65536):
    cdef const double[::1] Tv = spec["Tvals"]
    cdef const i64[::1] glo = spec["guide_lo"]
    cdef const i64[::1] ghi = spec["guide_hi"]
    cdef Spec sp
    spec_from_views(&sp, spec["mode"], spec["p"], spec["xi"], spec["kappa"],
                    spec["tail_threshold"], spec["guide_bits"], Tv, glo, ghi)

    cdef const double[::1] E = np.ascontiguousarray(edges, dtype=np.float64)
    cdef const double[::1] A = np.ascontiguousarray(anchors, dtype=np.float64)
    cdef i64 K = E.shape[0] - 1
    cdef i64 J = A.shape[0]
    cdef i64 nsub = n_sub
    cdef double subw = sub_w
    cdef double span = nsub * subw

    counts_np = np.zeros(K + 1, dtype=np.int64)
    sub_counts_np = np.zeros((J, nsub), dtype=np.int64)
    sub_tau_np = np.zeros((J, nsub), dtype=np.float64)
    tent_np = np.zeros(J, dtype=np.float64)
    m_sums_np = np.zeros(J, dtype=np.float64)
    cdef i64[::1] counts = counts_np
    cdef i64[:, ::1] sub_counts = sub_counts_np
    cdef double[:, ::1] sub_tau = sub_tau_np
    cdef double[::1] tent = tent_np
    cdef double[::1] m_sums = m_sums_np

    cdef i64 n_store = max(0, min(store_upto, unit_hi) - unit_lo)
    st_tau_np = np.zeros(n_store, dtype=np.float64)
    st_steps_np = np.zeros(n_store, dtype=np.int64)
    st_status_np = np.zeros(n_store, dtype=np.int8)
    st_fn_np = np.zeros(n_store, dtype=np.int64)
    st_fe_np = np.zeros(n_store, dtype=np.int8)
    st_ln_np = np.zeros(n_store, dtype=np.int64)
    st_le_np = np.zeros(n_store, dtype=np.int8)
    cdef double[::1] st_tau = st_tau_np
    cdef i64[::1] st_steps = st_steps_np
    cdef signed char[::1] st_status = st_status_np
    cdef i64[::1] st_fn = st_fn_np
    cdef signed char[::1] st_fe = st_fe_np
    cdef i64[::1] st_ln = st_ln_np
    cdef signed char[::1] st_le = st_le_np

    cdef u64 c_seed = seed, c_stream = stream
    cdef i64 lo = unit_lo, hi = unit_hi, unit
    cdef double c_tau_stop = tau_stop
    cdef i64 c_step_cap = step_cap
    cdef Stream st
    cdef Exc ex
    cdef i64 n_total = 0, n_returned = 0, n_censored = 0, n_capped = 0
    cdef i64 sum_steps = 0
    cdef i64 b, j, sub, jt
    cdef double w, contrib

    with nogil:
        for unit in range(lo, hi):
            stream_init(&st, c_seed, c_stream, <u64> unit, 0ULL)
            run_excursion(&sp, &st, c_tau_stop, c_step_cap, 0, 0, &ex)
            n_total += 1
            sum_steps += ex.steps
            if ex.status == 0:
                n_returned += 1
                b = _bin_le(E, ex.tau)
                if b >= K or b < 0:
                    counts[K] += 1
                else:
                    counts[b] += 1
                j = _bin_le(A, ex.tau)
                if j >= 0 and ex.tau < A[j] + span:
                    sub = <i64> floor((ex.tau - A[j]) / subw)
                    if sub > nsub - 1:
                        sub = nsub - 1
                    sub_counts[j, sub] += 1
                    sub_tau[j, sub] += ex.tau
                jt = _first_gt(A, ex.tau - 1.0)
                if jt < J:
                    w = 1.0 - fabs(ex.tau - A[jt])
                    if w > 0.0:
                        tent[jt] += w
            else:
                counts[K] += 1
                if ex.status == 1:
                    n_censored += 1
                else:
                    n_capped += 1
            for j in range(J):
                if ex.status == 0 and ex.tau < A[j]:
                    contrib = ex.tau
                else:
                    contrib = A[j]
                m_sums[j] += contrib
            if unit - lo < n_store:
                st_tau[unit - lo] = ex.tau
                st_steps[unit - lo] = ex.steps
                st_status[unit - lo] = <signed char> ex.status
                st_fn[unit - lo] = ex.first_n
                st_fe[unit - lo] = <signed char> ex.first_eps
                st_ln[unit - lo] = ex.last_n
                st_le[unit - lo] = <signed char> ex.last_eps

    store = {}
    if n_store > 0:
        store = {"tau": st_tau_np, "steps": st_steps_np,
                 "status": st_status_np, "first_n": st_fn_np,
                 "first_eps": st_fe_np, "last_n": st_ln_np,
                 "last_eps": st_le_np}
    return {"counts": counts_np, "sub_counts": sub_counts_np,
            "sub_tau": sub_tau_np, "tent": tent_np, "m_sums": m_sums_np,
            "store": store, "n_total": int(n_total),
            "n_returned": int(n_returned), "n_censored": int(n_censored),
            "n_capped": int(n_capped), "sum_steps": int(sum_steps)}


def sample_kernel(spec, seed, stream, unit_lo, unit_hi, tau_stop, step_cap,
                  batch=65536):
    cdef const double[::1] Tv = spec["Tvals"]
    cdef const i64[::1] glo = spec["guide_lo"]
    cdef const i64[::1] ghi = spec["guide_hi"]
    cdef Spec sp
    spec_from_views(&sp, spec["mode"], spec["p"], spec["xi"], spec["kappa"],
                    spec["tail_threshold"], spec["guide_bits"], Tv, glo, ghi)

    cdef i64 m = unit_hi - unit_lo
    tau_np = np.zeros(m, dtype=np.float64)
    steps_np = np.zeros(m, dtype=np.int64)
    status_np = np.zeros(m, dtype=np.int8)
    fn_np = np.zeros(m, dtype=np.int64)
    fe_np = np.zeros(m, dtype=np.int8)
    ln_np = np.zeros(m, dtype=np.int64)
    le_np = np.zeros(m, dtype=np.int8)
    cdef double[::1] tau = tau_np
    cdef i64[::1] steps = steps_np
    cdef signed char[::1] status = status_np
    cdef i64[::1] fn = fn_np
    cdef signed char[::1] fe = fe_np
    cdef i64[::1] ln = ln_np
    cdef signed char[::1] le = le_np

    cdef u64 c_seed = seed, c_stream = stream
    cdef i64 lo = unit_lo, unit
    cdef double c_tau_stop = tau_stop
    cdef i64 c_step_cap = step_cap
    cdef Stream st
    cdef Exc ex
    with nogil:
        for unit in range(lo, lo + m):
            stream_init(&st, c_seed, c_stream, <u64> unit, 0ULL)
            run_excursion(&sp, &st, c_tau_stop, c_step_cap, 0, 0, &ex)
            tau[unit - lo] = ex.tau
            steps[unit - lo] = ex.steps
            status[unit - lo] = <signed char> ex.status
            fn[unit - lo] = ex.first_n
            fe[unit - lo] = <signed char> ex.first_eps
            ln[unit - lo] = ex.last_n
            le[unit - lo] = <signed char> ex.last_eps
    return {"tau": tau_np, "steps": steps_np, "status": status_np,
            "first_n": fn_np, "first_eps": fe_np,
            "last_n": ln_np, "last_eps": le_np}


cdef inline bint _in_sorted(const i64[::1] arr, i64 x) noexcept nogil:
    cdef i64 lo = 0, hi = arr.shape[0] - 1, mid
    if arr.shape[0] == 0:
        return True          # empty sentinel = whole space
    while lo <= hi:
        mid = (lo + hi) >> 1
        if arr[mid] == x:
            return True
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid - 1
    return False


def renewal_kernel(spec, seed, stream, unit_lo, unit_hi, t_grid, h,
                   A_ns, B_ns, step_cap, batch=32768):
    cdef const double[::1] Tv = spec["Tvals"]
    cdef const i64[::1] glo = spec["guide_lo"]
    cdef const i64[::1] ghi = spec["guide_hi"]
    cdef Spec sp
    spec_from_views(&sp, spec["mode"], spec["p"], spec["xi"], spec["kappa"],
                    spec["tail_threshold"], spec["guide_bits"], Tv, glo, ghi)

    tg_np = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef const double[::1] tg = tg_np
    cdef i64 nt = tg.shape[0]
    A_np = (np.zeros(0, dtype=np.int64) if A_ns is None
            else np.ascontiguousarray(A_ns, dtype=np.int64))
    B_np = (np.zeros(0, dtype=np.int64) if B_ns is None
            else np.ascontiguousarray(B_ns, dtype=np.int64))
    cdef const i64[::1] Aset = A_np
    cdef const i64[::1] Bset = B_np

    hits_np = np.zeros(nt, dtype=np.int64)
    cdef i64[::1] hits = hits_np
    cdef i64 trial_hits[64]
    cdef bint decided[64]
    if nt > 64:
        raise ValueError("t_grid too long for the renewal kernel (max 64)")

    cdef double c_h = h, sweep_end = float(np.max(tg_np) + h)
    cdef u64 c_seed = seed, c_stream = stream
    cdef i64 c_step_cap = step_cap
    cdef i64 unit, lo = unit_lo, hi = unit_hi
    cdef i64 n_startA = 0, n_voided = 0, n_trials = 0
    cdef Stream st
    cdef Exc ex
    cdef double S, t
    cdef i64 j, k
    cdef bint startA, inB, voided, any_undecided

    with nogil:
        for unit in range(lo, hi):
            n_trials += 1
            S = 0.0
            startA = False
            voided = False
            for j in range(nt):
                decided[j] = False
                trial_hits[j] = 0
            k = 1
            any_undecided = True
            while any_undecided:
                stream_init(&st, c_seed, c_stream, <u64> unit, <u64> k)
                run_excursion(&sp, &st, sweep_end - S + 1e-12, c_step_cap,
                              0, 0, &ex)
                if k == 1:
                    startA = _in_sorted(Aset, ex.first_n)
                inB = _in_sorted(Bset, ex.first_n)
                for j in range(nt):
                    if decided[j]:
                        continue
                    t = tg[j]
                    if t == 0.0:
                        if S >= 0.0 and S <= c_h and inB:
                            trial_hits[j] = 1
                            decided[j] = True
                    else:
                        if S > t and S <= t + c_h and inB:
                            trial_hits[j] = 1
                            decided[j] = True
                    if not decided[j] and S > t + c_h:
                        decided[j] = True
                if ex.status == 0:
                    S += ex.tau
                else:
                    if ex.status == 2:
                        voided = True
                    for j in range(nt):
                        decided[j] = True
                any_undecided = False
                for j in range(nt):
                    if not decided[j]:
                        any_undecided = True
                        break
                k += 1
            if startA and not voided:
                n_startA += 1
                for j in range(nt):
                    hits[j] += trial_hits[j]
            if voided:
                n_voided += 1

    return {"hits": hits_np, "n_trials": int(n_trials),
            "n_startA": int(n_startA), "n_voided": int(n_voided)}


def mixing_kernel(spec, seed, stream, unit_lo, unit_hi, t_grid, a1, a2, b1, b2,
                  cumA_p, cumA_n, B_ns, step_cap, batch=32768):
    cdef const double[::1] Tv = spec["Tvals"]
    cdef const i64[::1] glo = spec["guide_lo"]
    cdef const i64[::1] ghi = spec["guide_hi"]
    cdef Spec sp
    spec_from_views(&sp, spec["mode"], spec["p"], spec["xi"], spec["kappa"],
                    spec["tail_threshold"], spec["guide_bits"], Tv, glo, ghi)

    tg_np = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef const double[::1] tg = tg_np
    cdef i64 nt = tg.shape[0]
    if nt > 64:
        raise ValueError("t_grid too long for the mixing kernel (max 64)")
    cumA_p_np = np.ascontiguousarray(cumA_p, dtype=np.float64)
    cumA_n_np = np.ascontiguousarray(cumA_n, dtype=np.int64)
    cdef const double[::1] cAp = cumA_p_np
    cdef const i64[::1] cAn = cumA_n_np
    B_np = (np.zeros(0, dtype=np.int64) if B_ns is None
            else np.ascontiguousarray(B_ns, dtype=np.int64))
    cdef const i64[::1] Bset = B_np

    hits_np = np.zeros(nt, dtype=np.int64)
    cdef i64[::1] hits = hits_np
    cdef i64 trial_hits[64]
    cdef bint decided[64]
    cdef double wlo[64]
    cdef double whi[64]

    cdef double c_a1 = a1, c_a2 = a2, c_b1 = b1, c_b2 = b2
    cdef u64 c_seed = seed, c_stream = stream
    cdef i64 c_step_cap = step_cap
    cdef i64 unit, lo = unit_lo, hi = unit_hi
    cdef i64 n_voided = 0, n_trials = 0
    cdef Stream st
    cdef Exc ex
    cdef double S, u_pos, d0, d1, d2, vA
    cdef i64 j, k, idx, lo_i, hi_i, mid
    cdef i64 n0
    cdef int eps0
    cdef bint inB, voided, any_undecided

    with nogil:
        for unit in range(lo, hi):
            n_trials += 1
            # channel-0 trial draws: u position, conditioned first symbol
            stream_init(&st, c_seed, c_stream, <u64> unit, 0ULL)
            d0 = next_double(&st)
            d1 = next_double(&st)
            d2 = next_double(&st)
            u_pos = c_a1 + (c_a2 - c_a1) * d0
            vA = 1.0 - d1
            # first index with cumA_p[idx] >= vA (searchsorted left)
            lo_i = 0
            hi_i = cAp.shape[0]
            while lo_i < hi_i:
                mid = (lo_i + hi_i) >> 1
                if cAp[mid] < vA:
                    lo_i = mid + 1
                else:
                    hi_i = mid
            idx = lo_i
            if idx > cAn.shape[0] - 1:
                idx = cAn.shape[0] - 1
            n0 = cAn[idx]
            eps0 = 1 if d2 < 0.5 else -1

            S = 0.0
            voided = False
            for j in range(nt):
                decided[j] = False
                trial_hits[j] = 0
                wlo[j] = (u_pos + tg[j]) - c_b2
                whi[j] = (u_pos + tg[j]) - c_b1
            k = 1
            any_undecided = True
            while any_undecided:
                stream_init(&st, c_seed, c_stream, <u64> unit, <u64> k)
                if k == 1:
                    run_excursion(&sp, &st, whi[nt - 1] - S + 1e-12,
                                  c_step_cap, n0, eps0, &ex)
                else:
                    run_excursion(&sp, &st, whi[nt - 1] - S + 1e-12,
                                  c_step_cap, 0, 0, &ex)
                inB = _in_sorted(Bset, ex.first_n)
                for j in range(nt):
                    if decided[j]:
                        continue
                    if S >= wlo[j] and S <= whi[j] and inB:
                        trial_hits[j] = 1
                        decided[j] = True
                    if not decided[j] and S > whi[j]:
                        decided[j] = True
                if ex.status == 0:
                    S += ex.tau
                else:
                    if ex.status == 2:
                        voided = True
                    for j in range(nt):
                        decided[j] = True
                any_undecided = False
                for j in range(nt):
                    if not decided[j]:
                        any_undecided = True
                        break
                k += 1
            if voided:
                n_voided += 1
            else:
                for j in range(nt):
                    hits[j] += trial_hits[j]

    return {"hits": hits_np, "n_trials": int(n_trials),
            "n_voided": int(n_voided)}
