"""Pure-numpy simulation kernels (fallback backend).

Semantics contract shared with the Cython kernel in ``_kernel.pyx``:

* every excursion/trial owns a Philox substream addressed by
  (seed, stream, unit, channel); step k consumes doubles 2k, 2k+1 of its
  substream, so unused draws never leak between units;
* in-table symbol sampling compares the uniform variate against the shared
  ``Tvals`` array (pure comparisons, hence backend-independent); the rare
  analytic-tail path calls libm ``pow`` scalar-wise on both backends;
* floating-point accumulators are summed in ascending unit order per bin.

Under this contract the two backends produce byte-identical accumulators,
which the test suite asserts on small budgets.
"""

import math

import numpy as np

from .philox import philox4x64, to_double

NTAB = 65536

_STATUS_RETURNED = 0
_STATUS_CENSORED = 1
_STATUS_CAPPED = 2


def _T_scalar(spec, n):
    if spec["mode"] == 0:
        return math.pow(n, -spec["p"])
    return math.pow(1.0 + math.log(n), spec["kappa"]) * math.pow(n, -spec["p"])


def _sample_n_tail_scalar(spec, v):
    """Analytic inversion beyond the table: n = max{n: T(n) >= v}."""
    p = spec["p"]
    if spec["mode"] == 0:
        x = math.pow(v, -1.0 / p)
    else:
        kappa = spec["kappa"]
        x = math.pow(v, -1.0 / p)
        for _ in range(60):
            lx = math.log(x)
            f = kappa * math.log1p(lx) - p * lx - math.log(v)
            df = (kappa / (1.0 + lx) - p) / x
            x_new = x - f / df
            if x_new <= 1.0:
                x_new = 0.5 * (x + 1.0)
            if abs(x_new - x) <= 1e-14 * x:
                x = x_new
                break
            x = x_new
    n = int(x)
    if n < NTAB + 1:
        n = NTAB + 1
    while _T_scalar(spec, n + 1) >= v:
        n += 1
    while n > NTAB + 1 and _T_scalar(spec, n) < v:
        n -= 1
    return n


def _sample_n_vec(spec, v):
    neg_T = spec["neg_Tvals"]
    thr = spec["tail_threshold"]
    n = np.empty(v.shape, dtype=np.int64)
    in_tab = v >= thr
    if in_tab.any():
        n[in_tab] = np.searchsorted(neg_T, -v[in_tab], side="right")
    rest = np.nonzero(~in_tab)[0]
    for i in rest:
        n[i] = _sample_n_tail_scalar(spec, float(v[i]))
    return n


def _prep_spec(spec):
    spec = dict(spec)
    spec["neg_Tvals"] = -np.asarray(spec["Tvals"], dtype=np.float64)
    return spec


def _blocks(seed, stream, units, channels, block):
    ctr = np.zeros((units.size, 4), dtype=np.uint64)
    ctr[:, 0] = np.uint64(block)
    ctr[:, 1] = units
    ctr[:, 2] = channels
    return to_double(philox4x64(ctr, (np.uint64(seed), np.uint64(stream))))


def excursions_batch(spec, seed, stream, units, channels, tau_stop, step_cap,
                     init=None):
    """Simulate one excursion per unit; returns dict of per-unit arrays.

    ``init`` optionally supplies a pre-drawn first symbol as
    (n0, eps0) int arrays, in which case the walk starts one step in and
    substream draws begin at the second step.
    """
    spec = _prep_spec(spec)
    xi = spec["xi"]
    m = units.size
    units = np.asarray(units, dtype=np.uint64)
    channels = np.broadcast_to(np.asarray(channels, dtype=np.uint64), (m,))
    tau_stop = np.broadcast_to(np.asarray(tau_stop, dtype=np.float64), (m,))

    q = np.zeros(m, dtype=np.int64)
    tau = np.zeros(m, dtype=np.float64)
    steps = np.zeros(m, dtype=np.int64)
    first_n = np.zeros(m, dtype=np.int64)
    first_eps = np.zeros(m, dtype=np.int8)
    last_n = np.zeros(m, dtype=np.int64)
    last_eps = np.zeros(m, dtype=np.int8)
    status = np.full(m, -1, dtype=np.int8)

    cur = np.arange(m)
    if init is not None:
        n0, eps0 = init
        q[:] = eps0.astype(np.int64) * n0.astype(np.int64)
        tau[:] = np.where(eps0 > 0, n0 + xi, 1.0)
        steps[:] = 1
        first_n[:] = n0
        first_eps[:] = eps0
        last_n[:] = n0
        last_eps[:] = eps0
        # a single symbol never returns to 0, but it can already overrun
        cens0 = tau > tau_stop
        status[cens0] = _STATUS_CENSORED
        cur = cur[~cens0]
    block = 0
    while cur.size:
        d = _blocks(seed, stream, units[cur], channels[cur], block)
        rows = np.arange(cur.size)
        for half in (0, 1):
            if cur.size == 0:
                break
            u1 = d[rows, 2 * half]
            u2 = d[rows, 2 * half + 1]
            v = 1.0 - u1
            n = _sample_n_vec(spec, v)
            eps = np.where(u2 < 0.5, np.int64(1), np.int64(-1))
            q[cur] += eps * n
            tau[cur] += np.where(eps > 0, n + xi, 1.0)
            steps[cur] += 1
            if init is None:
                fresh = steps[cur] == 1
                if fresh.any():
                    first_n[cur[fresh]] = n[fresh]
                    first_eps[cur[fresh]] = eps[fresh].astype(np.int8)
            last_n[cur] = n
            last_eps[cur] = eps.astype(np.int8)

            ret = q[cur] == 0
            cens = ~ret & (tau[cur] > tau_stop[cur])
            capp = ~ret & ~cens & (steps[cur] >= step_cap)
            status[cur[ret]] = _STATUS_RETURNED
            status[cur[cens]] = _STATUS_CENSORED
            status[cur[capp]] = _STATUS_CAPPED
            dead = ret | cens | capp
            if dead.any():
                keep = ~dead
                cur = cur[keep]
                rows = rows[keep]
        block += 1

    return {"tau": tau, "steps": steps, "status": status,
            "first_n": first_n, "first_eps": first_eps,
            "last_n": last_n, "last_eps": last_eps}


def tail_kernel(spec, seed, stream, unit_lo, unit_hi, tau_stop, step_cap,
                edges, anchors, n_sub, sub_w, store_upto, batch=65536):
    """Excursion accumulation: survival histogram, anchored sub-bins with
    weighted mass, tent values, running-integral sums, optional raw store."""
    edges = np.asarray(edges, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    K = edges.size - 1
    J = anchors.size
    counts = np.zeros(K + 1, dtype=np.int64)
    sub_counts = np.zeros((J, n_sub), dtype=np.int64)
    sub_tau = np.zeros((J, n_sub), dtype=np.float64)
    tent = np.zeros(J, dtype=np.float64)
    m_sums = np.zeros(J, dtype=np.float64)
    totals = {"n_total": 0, "n_returned": 0, "n_censored": 0, "n_capped": 0,
              "sum_steps": 0}
    stores = []

    span = n_sub * sub_w
    for lo in range(unit_lo, unit_hi, batch):
        hi = min(lo + batch, unit_hi)
        units = np.arange(lo, hi, dtype=np.uint64)
        out = excursions_batch(spec, seed, stream, units, 0, tau_stop, step_cap)
        tau, status, steps = out["tau"], out["status"], out["steps"]
        ret = status == _STATUS_RETURNED

        totals["n_total"] += int(tau.size)
        totals["n_returned"] += int(ret.sum())
        totals["n_censored"] += int((status == _STATUS_CENSORED).sum())
        totals["n_capped"] += int((status == _STATUS_CAPPED).sum())
        totals["sum_steps"] += int(steps.sum())

        t_ret = tau[ret]
        b = np.searchsorted(edges, t_ret, side="right") - 1
        over = (b >= K) | (b < 0)
        np.add.at(counts, np.where(over, K, np.clip(b, 0, K - 1)), 1)
        counts[K] += int((~ret).sum())   # censored/capped: true tau > top edge

        j = np.searchsorted(anchors, t_ret, side="right") - 1
        ok = (j >= 0) & (t_ret < anchors[np.clip(j, 0, J - 1)] + span)
        if ok.any():
            jj = j[ok]
            tv = t_ret[ok]
            sub = np.floor((tv - anchors[jj]) / sub_w).astype(np.int64)
            sub = np.minimum(sub, n_sub - 1)
            np.add.at(sub_counts, (jj, sub), 1)
            np.add.at(sub_tau, (jj, sub), tv)

        jt = np.searchsorted(anchors, t_ret - 1.0, side="right")
        okt = (jt < J)
        if okt.any():
            jj = jt[okt]
            w = 1.0 - np.abs(t_ret[okt] - anchors[jj])
            sel = w > 0.0
            np.add.at(tent, jj[sel], w[sel])

        tau_eff = np.where(ret, tau, np.inf)
        for jdx in range(J):
            contrib = np.minimum(tau_eff, anchors[jdx])
            np.add.at(m_sums, np.full(contrib.size, jdx), contrib)

        if lo < store_upto:
            keep = min(hi, store_upto) - lo
            stores.append({k: out[k][:keep] for k in out})

    store = {}
    if stores:
        store = {k: np.concatenate([s[k] for s in stores]) for k in stores[0]}
    return {"counts": counts, "sub_counts": sub_counts, "sub_tau": sub_tau,
            "tent": tent, "m_sums": m_sums, "store": store, **totals}


def sample_kernel(spec, seed, stream, unit_lo, unit_hi, tau_stop, step_cap,
                  batch=65536):
    outs = []
    for lo in range(unit_lo, unit_hi, batch):
        hi = min(lo + batch, unit_hi)
        units = np.arange(lo, hi, dtype=np.uint64)
        outs.append(excursions_batch(spec, seed, stream, units, 0,
                                     tau_stop, step_cap))
    return {k: np.concatenate([o[k] for o in outs]) for k in outs[0]}


def _in_set(values, sorted_set):
    if sorted_set is None:
        return np.ones(values.shape, dtype=bool)
    pos = np.searchsorted(sorted_set, values)
    pos = np.clip(pos, 0, sorted_set.size - 1)
    return sorted_set[pos] == values


def renewal_kernel(spec, seed, stream, unit_lo, unit_hi, t_grid, h,
                   A_ns, B_ns, step_cap, batch=32768):
    """Renewal-window trials.

    Per trial: excursion k lives on channel k (k >= 1).  The boundary after k
    completed excursions is tested against every window (t, t+h] (t = 0:
    closed at 0) with the membership of the *next* excursion's first symbol;
    the n = 0 boundary is tested with excursion 1's own first symbol.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    nt = t_grid.size
    sweep_end = float(t_grid.max() + h)
    hits = np.zeros(nt, dtype=np.int64)
    n_startA = 0
    n_voided = 0
    n_trials = 0

    for lo in range(unit_lo, unit_hi, batch):
        hi = min(lo + batch, unit_hi)
        m = hi - lo
        n_trials += m
        units = np.arange(lo, hi, dtype=np.uint64)
        S = np.zeros(m, dtype=np.float64)
        startA = np.zeros(m, dtype=bool)
        decided = np.zeros((m, nt), dtype=bool)
        hit = np.zeros((m, nt), dtype=bool)
        voided = np.zeros(m, dtype=bool)
        act = np.arange(m)

        k = 1
        while act.size:
            rem = sweep_end - S[act] + 1e-12
            out = excursions_batch(spec, seed, stream, units[act], k,
                                   rem, step_cap)
            fn = out["first_n"]
            if k == 1:
                startA[act] = _in_set(fn, A_ns)
            inB = _in_set(fn, B_ns)
            # boundary S_{k-1} against each window
            for j in range(nt):
                t = t_grid[j]
                und = ~decided[act, j]
                Sa = S[act]
                if t == 0.0:
                    inw = (Sa >= 0.0) & (Sa <= h)
                else:
                    inw = (Sa > t) & (Sa <= t + h)
                newhit = und & inw & inB
                hit[act[newhit], j] = True
                decided[act[newhit], j] = True
                passed = und & (Sa > t + h)
                decided[act[passed], j] = True
            retd = out["status"] == _STATUS_RETURNED
            S[act[retd]] += out["tau"][retd]
            voided[act[out["status"] == _STATUS_CAPPED]] = True
            ended = ~retd
            decided[act[ended], :] = True
            live = ~decided[act].all(axis=1) & ~ended
            act = act[live]
            k += 1

        ok = startA & ~voided
        hits += (hit & ok[:, None]).sum(axis=0).astype(np.int64)
        n_startA += int(ok.sum())
        n_voided += int(voided.sum())

    return {"hits": hits, "n_trials": n_trials, "n_startA": n_startA,
            "n_voided": n_voided}


def mixing_kernel(spec, seed, stream, unit_lo, unit_hi, t_grid, a1, a2, b1, b2,
                  cumA_p, cumA_n, B_ns, step_cap, batch=32768):
    """Flow-correlation trials.

    Channel 0 (block 0) carries the trial-level draws: d0 the fiber height
    u ~ U[a1, a2], d1/d2 the A-conditioned first symbol.  Excursion k >= 1
    lives on channel k (channel 1 continues after the conditioned symbol).
    A landing at boundary S_{k-1} within [u+t-b2, u+t-b1] is a hit when the
    excursion that starts there has first symbol in B.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    nt = t_grid.size
    hits = np.zeros(nt, dtype=np.int64)
    n_voided = 0
    n_trials = 0
    spec_p = _prep_spec(spec)

    for lo in range(unit_lo, unit_hi, batch):
        hi = min(lo + batch, unit_hi)
        m = hi - lo
        n_trials += m
        units = np.arange(lo, hi, dtype=np.uint64)
        d = _blocks(seed, stream, units, np.zeros(m, dtype=np.uint64), 0)
        u_pos = a1 + (a2 - a1) * d[:, 0]
        vA = 1.0 - d[:, 1]
        idx = np.searchsorted(cumA_p, vA, side="left")
        idx = np.clip(idx, 0, cumA_n.size - 1)
        n0 = cumA_n[idx].astype(np.int64)
        eps0 = np.where(d[:, 2] < 0.5, np.int8(1), np.int8(-1))

        # window ends; the sweep must pass the farthest window
        w_lo = (u_pos[:, None] + t_grid[None, :]) - b2
        w_hi = (u_pos[:, None] + t_grid[None, :]) - b1
        S = np.zeros(m, dtype=np.float64)
        decided = np.zeros((m, nt), dtype=bool)
        hit = np.zeros((m, nt), dtype=bool)
        voided = np.zeros(m, dtype=bool)
        act = np.arange(m)

        k = 1
        while act.size:
            rem = w_hi[act, -1] - S[act] + 1e-12
            if k == 1:
                out = excursions_batch(spec, seed, stream, units[act], 1,
                                       rem, step_cap,
                                       init=(n0[act], eps0[act]))
            else:
                out = excursions_batch(spec, seed, stream, units[act], k,
                                       rem, step_cap)
            inB = _in_set(out["first_n"], B_ns)
            Sa = S[act]
            for j in range(nt):
                und = ~decided[act, j]
                inw = (Sa >= w_lo[act, j]) & (Sa <= w_hi[act, j])
                newhit = und & inw & inB
                hit[act[newhit], j] = True
                decided[act[newhit], j] = True
                passed = und & (Sa > w_hi[act, j])
                decided[act[passed], j] = True
            retd = out["status"] == _STATUS_RETURNED
            S[act[retd]] += out["tau"][retd]
            voided[act[out["status"] == _STATUS_CAPPED]] = True
            ended = ~retd
            decided[act[ended], :] = True
            live = ~decided[act].all(axis=1) & ~ended
            act = act[live]
            k += 1

        ok = ~voided
        hits += (hit & ok[:, None]).sum(axis=0).astype(np.int64)
        n_voided += int(voided.sum())

    _ = spec_p
    return {"hits": hits, "n_trials": n_trials, "n_voided": n_voided}
