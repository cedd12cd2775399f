"""numba kernels for the step loops.

All kernels mutate their load arrays in place and draw from three numpy
Generators (allocation, matching, rounding) so that the Python reference path
and the compiled path consume identical streams.

Status codes: 0 ok, 1 conservation violated, 2 max/min contraction violated.
"""

import numpy as np
from numba import njit

OK = 0
CONSERVATION = 1
CONTRACTION = 2


@njit(cache=True)
def _spread(v):
    lo = v[0]
    hi = v[0]
    for k in range(1, v.shape[0]):
        if v[k] < lo:
            lo = v[k]
        if v[k] > hi:
            hi = v[k]
    return hi - lo


@njit(cache=True)
def _extrema(x):
    lo = x[0]
    hi = x[0]
    s = 0
    for k in range(x.shape[0]):
        s += x[k]
        if x[k] < lo:
            lo = x[k]
        if x[k] > hi:
            hi = x[k]
    return lo, hi, s


@njit(cache=True)
def _discrete_pair(x, a, b, beta, rr):
    """Balance x[a], x[b]; returns the rounding error at node a."""
    if x[a] >= x[b]:
        hi = a
        lo = b
    else:
        hi = b
        lo = a
    diff = x[hi] - x[lo]
    if beta == 1.0:
        amt = diff / 2.0
        load = diff >> 1
        if diff & 1:
            if rr.random() < 0.5:
                load += 1
    else:
        amt = beta * diff / 2.0
        fl = np.floor(amt)
        load = np.int64(fl)
        if amt > fl:
            if rr.random() < amt - fl:
                load += 1
    x[hi] -= load
    x[lo] += load
    err_hi = amt - load
    if hi == a:
        return err_hi
    return -err_hi


@njit(cache=True)
def _continuous_pair(y, a, b, beta):
    tr = beta * (y[a] - y[b]) / 2.0
    y[a] -= tr
    y[b] += tr


@njit(cache=True)
def async_steps(nbr, x, xi, x0, track_init, beta, discrete, steps,
                ra, rm, rr, log_on, log_pairs, log_err, audit, stop_thr):
    """Run `steps` asynchronous single-edge steps.

    Returns (status, steps_done). Logged pair rows are (allocation node, other).
    """
    n = nbr.shape[0]
    d = nbr.shape[1]
    nd = n * d
    for s in range(steps):
        arc = np.int64(rm.random() * nd)
        if arc >= nd:
            arc = nd - 1
        u = arc // d
        v = nbr[u, arc - u * d]
        if ra.random() < 0.5:
            a = u
            b = v
        else:
            a = v
            b = u
        xi[a] += 1.0
        err = 0.0
        if discrete:
            x[a] += 1
            lo0 = x[0]
            hi0 = x[0]
            s0 = x[0]
            if audit:
                lo0, hi0, s0 = _extrema(x)
            err = _discrete_pair(x, a, b, beta, rr)
            if audit:
                lo1, hi1, s1 = _extrema(x)
                if s1 != s0:
                    return CONSERVATION, s
                if hi1 > hi0 or lo1 < lo0:
                    return CONTRACTION, s
        _continuous_pair(xi, a, b, beta)
        if track_init:
            _continuous_pair(x0, a, b, beta)
        if log_on:
            log_pairs[s, 0] = a
            log_pairs[s, 1] = b
            log_err[s] = err
        if stop_thr >= 0.0 and _spread(x0) <= stop_thr:
            return OK, s + 1
    return OK, steps


@njit(cache=True)
def sync_steps(edges, n, x, xi, x0, track_init, beta, discrete, steps, t_start,
               m, use_circuit, circ_ptr, circ_pairs, p, ra, rm, rr,
               log_on, log_count, log_pairs, log_err, log_alloc, audit, stop_thr):
    """Run `steps` synchronous rounds (allocate m items, match, balance).

    Step indices are ``t_start + 1 .. t_start + steps``; circuits use matching
    ``(t - 1) mod period``. Returns (status, steps_done, pairs_logged).
    """
    ne = edges.shape[0]
    chosen = np.zeros(ne, dtype=np.bool_)
    sdeg = np.zeros(n, dtype=np.int64)
    period = circ_ptr.shape[0] - 1
    off = 0
    aoff = 0
    for s in range(steps):
        for _ in range(m):
            node = np.int64(ra.random() * n)
            if node >= n:
                node = n - 1
            xi[node] += 1.0
            if discrete:
                x[node] += 1
            if log_on:
                log_alloc[aoff] = node
                aoff += 1
        lo0 = x[0]
        hi0 = x[0]
        s0 = x[0]
        if audit and discrete:
            lo0, hi0, s0 = _extrema(x)
        npairs = 0
        if use_circuit:
            c = (t_start + s) % period
            for k in range(circ_ptr[c], circ_ptr[c + 1]):
                a = circ_pairs[k, 0]
                b = circ_pairs[k, 1]
                err = 0.0
                if discrete:
                    err = _discrete_pair(x, a, b, beta, rr)
                _continuous_pair(xi, a, b, beta)
                if track_init:
                    _continuous_pair(x0, a, b, beta)
                if log_on:
                    log_pairs[off, 0] = a
                    log_pairs[off, 1] = b
                    log_err[off] = err
                    off += 1
                npairs += 1
        else:
            for e in range(ne):
                hit = rm.random() < p
                chosen[e] = hit
                if hit:
                    sdeg[edges[e, 0]] += 1
                    sdeg[edges[e, 1]] += 1
            for e in range(ne):
                if chosen[e]:
                    a = edges[e, 0]
                    b = edges[e, 1]
                    if sdeg[a] == 1 and sdeg[b] == 1:
                        err = 0.0
                        if discrete:
                            err = _discrete_pair(x, a, b, beta, rr)
                        _continuous_pair(xi, a, b, beta)
                        if track_init:
                            _continuous_pair(x0, a, b, beta)
                        if log_on:
                            log_pairs[off, 0] = a
                            log_pairs[off, 1] = b
                            log_err[off] = err
                            off += 1
                        npairs += 1
            for e in range(ne):
                if chosen[e]:
                    sdeg[edges[e, 0]] = 0
                    sdeg[edges[e, 1]] = 0
        if log_on:
            log_count[s] = npairs
        if audit and discrete:
            lo1, hi1, s1 = _extrema(x)
            if s1 != s0:
                return CONSERVATION, s, off
            if hi1 > hi0 or lo1 < lo0:
                return CONTRACTION, s, off
        if stop_thr >= 0.0 and _spread(x0) <= stop_thr:
            return OK, s + 1, off
    return OK, steps, off


@njit(cache=True)
def backward_divergence(step_ptr, pairs, beta, v, sums, keep_series, series):
    """Apply the logged matchings to the columns of v from the last step back.

    ``sums[k]`` accumulates Phi(column k) after each application (steps t..1).
    ``series[s, k]`` stores Phi after s applications when keep_series is set
    (row 0 is the untouched start). Returns the largest per-step increase of
    Phi seen (should be <= 0 up to rounding).
    """
    t = step_ptr.shape[0] - 1
    n = v.shape[0]
    cols = v.shape[1]
    worst = -np.inf
    prev = np.empty(cols)
    for k in range(cols):
        tot = 0.0
        for i in range(n):
            tot += v[i, k]
        mean = tot / n
        acc = 0.0
        for i in range(n):
            acc += (v[i, k] - mean) ** 2
        prev[k] = acc
        if keep_series:
            series[0, k] = acc
    half = beta / 2.0
    for s in range(t):
        tau = t - 1 - s
        for q in range(step_ptr[tau], step_ptr[tau + 1]):
            a = pairs[q, 0]
            b = pairs[q, 1]
            for k in range(cols):
                tr = half * (v[a, k] - v[b, k])
                v[a, k] -= tr
                v[b, k] += tr
        for k in range(cols):
            tot = 0.0
            for i in range(n):
                tot += v[i, k]
            mean = tot / n
            acc = 0.0
            for i in range(n):
                acc += (v[i, k] - mean) ** 2
            sums[k] += acc
            if acc - prev[k] > worst:
                worst = acc - prev[k]
            prev[k] = acc
            if keep_series:
                series[s + 1, k] = acc
    return worst


@njit(cache=True)
def rm_potential_chain(edges, n, p, beta, v, steps, rm, out):
    """Phi of a vector under i.i.d. random matchings: out[s] = Phi after s steps."""
    ne = edges.shape[0]
    chosen = np.zeros(ne, dtype=np.bool_)
    sdeg = np.zeros(n, dtype=np.int64)
    mean = 0.0
    for i in range(n):
        mean += v[i]
    mean /= n
    acc = 0.0
    for i in range(n):
        acc += (v[i] - mean) ** 2
    out[0] = acc
    for s in range(steps):
        for e in range(ne):
            hit = rm.random() < p
            chosen[e] = hit
            if hit:
                sdeg[edges[e, 0]] += 1
                sdeg[edges[e, 1]] += 1
        for e in range(ne):
            if chosen[e]:
                a = edges[e, 0]
                b = edges[e, 1]
                if sdeg[a] == 1 and sdeg[b] == 1:
                    _continuous_pair(v, a, b, beta)
        for e in range(ne):
            if chosen[e]:
                sdeg[edges[e, 0]] = 0
                sdeg[edges[e, 1]] = 0
        acc = 0.0
        for i in range(n):
            acc += (v[i] - mean) ** 2
        out[s + 1] = acc


@njit(cache=True)
def se_potential_chain(edges, n, beta, v, steps, rm, out):
    """Same as rm_potential_chain for uniformly random single edges."""
    ne = edges.shape[0]
    mean = 0.0
    for i in range(n):
        mean += v[i]
    mean /= n
    acc = 0.0
    for i in range(n):
        acc += (v[i] - mean) ** 2
    out[0] = acc
    for s in range(steps):
        e = np.int64(rm.random() * ne)
        if e >= ne:
            e = ne - 1
        _continuous_pair(v, edges[e, 0], edges[e, 1], beta)
        acc = 0.0
        for i in range(n):
            acc += (v[i] - mean) ** 2
        out[s + 1] = acc
