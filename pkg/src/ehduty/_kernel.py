"""Compiled per-TTI world update.

Every random draw and battery mutation of the simulator happens here, so
that single-step inspection (``step_tti``), the full-run loop and the
stand-alone wake-up round share one code path. Device index == device id.

Ledger arrays (``harvested``, ``spent``, ``lost``) are int64 and track, per
device, gross harvest, energy actually removed from the battery, and harvest
discarded at the capacity clamp.
"""

import math

import numpy as np
from numba import njit

S1, S2, S3, S4 = 1, 2, 3, 4

GEOMETRY_ORACLE = 0
GEOMETRY_ESTIMATED = 1
SENSING_DETERMINISTIC = 0
SENSING_BERNOULLI = 1

N_PHI = 1024
PHI_COS = np.cos(2.0 * np.pi * np.arange(N_PHI) / N_PHI)


class NumericInconsistency(ArithmeticError):
    pass


@njit(cache=True)
def spend(j, cost, battery, spent):
    """Debit ``cost`` units; an unaffordable action drains the battery and fails."""
    b = battery[j]
    if b >= cost:
        battery[j] = b - cost
        spent[j] += cost
        return True
    battery[j] = 0
    spent[j] += b
    return False


@njit(cache=True)
def cond_report_prob(d_h, d_jh, cos_phi, eta):
    r = d_h * d_h + d_jh * d_jh - 2.0 * d_h * d_jh * cos_phi
    if r < 0.0:
        if r < -1e-12 * max(1.0, d_h * d_h + d_jh * d_jh):
            raise NumericInconsistency("negative law-of-cosines radicand")
        r = 0.0
    return math.exp(-eta * math.sqrt(r))


@njit(cache=True)
def wakeup_scores(ex, ey, rep_idx, rep_info, n_rep, cand_idx, n_cand, x, y, eta, psi, geometry, phi_cos, scores):
    """Best conditional report probability of each candidate over all reporters."""
    for c in range(n_cand):
        j = cand_idx[c]
        best = 0.0
        for r in range(n_rep):
            h = rep_idx[r]
            dxj = x[j] - x[h]
            dyj = y[j] - y[h]
            d_jh = math.sqrt(dxj * dxj + dyj * dyj)
            if geometry == GEOMETRY_ORACLE:
                dxe = ex - x[h]
                dye = ey - y[h]
                d_h = math.sqrt(dxe * dxe + dye * dye)
                if d_h > 0.0 and d_jh > 0.0:
                    cos_phi = (dxe * dxj + dye * dyj) / (d_h * d_jh)
                    cos_phi = min(1.0, max(-1.0, cos_phi))
                else:
                    cos_phi = 1.0
                p = cond_report_prob(d_h, d_jh, cos_phi, eta)
            else:
                d_h = -math.log(rep_info[r] / psi) / eta
                acc = 0.0
                for k in range(phi_cos.size):
                    acc += cond_report_prob(d_h, d_jh, phi_cos[k], eta)
                p = acc / phi_cos.size
            if p > best:
                best = p
        scores[c] = best


@njit(cache=True)
def wakeup_core(
    ex, ey, rep_idx, rep_info, n_rep, cand_idx, n_cand,
    x, y, battery, state, spent,
    eta, psi, i_min, p_thr, e_idle, e_tx, sensing, geometry, phi_cos, rng,
    order_out, score_out, woken_out, delivered_out,
):
    """Sequential wake-up of correlated sleepers until ``i_min`` is met.

    Returns ``(final_info, n_woken)``. ``order_out``/``score_out`` receive the
    candidates sorted by score (descending, ties by candidate order).
    """
    best = 0.0
    for r in range(n_rep):
        if rep_info[r] > best:
            best = rep_info[r]
    if best >= i_min or n_cand == 0:
        return best, 0
    scores = np.empty(n_cand)
    wakeup_scores(ex, ey, rep_idx, rep_info, n_rep, cand_idx, n_cand, x, y, eta, psi, geometry, phi_cos, scores)
    order = np.argsort(-scores, kind="mergesort")
    for i in range(n_cand):
        order_out[i] = cand_idx[order[i]]
        score_out[i] = scores[order[i]]
    n_woken = 0
    for i in range(n_cand):
        if score_out[i] < p_thr:
            break
        j = order_out[i]
        woken_out[n_woken] = j
        delivered_out[n_woken] = 0.0
        n_woken += 1
        state[j] = S2
        if not spend(j, e_idle, battery, spent):
            state[j] = S4
            continue
        dx = x[j] - ex
        dy = y[j] - ey
        pd = math.exp(-eta * math.sqrt(dx * dx + dy * dy))
        if sensing == SENSING_BERNOULLI and not (rng.random() < pd):
            state[j] = S4
            continue
        if spend(j, e_tx, battery, spent):
            state[j] = S3
            info = psi * pd
            delivered_out[n_woken - 1] = info
            if info > best:
                best = info
        else:
            state[j] = S4
        if best >= i_min:
            break
    return best, n_woken


@njit(cache=True)
def step(
    t, x, y, battery, state, on, drx, offset, harvested, spent, lost,
    genie, p_h, e_h, e_max, alpha, width, height,
    eta, psi, i_min, p_thr, e_idle, e_tx, sensing, geometry, phi_cos, rng,
    rep_idx, rep_info, order_buf, score_buf, woken_buf, delivered_buf, census,
):
    """Advance the world by one TTI.

    Returns ``(event, ex, ey, n_rep, initial_info, n_cand, n_woken,
    final_info, energy)``; reporters, wake-up ordering and the state census
    are written to the supplied buffers.
    """
    n = x.size
    energy = 0
    for j in range(n):
        energy -= spent[j]

    # 1. harvesting
    for j in range(n):
        if rng.random() < p_h:
            harvested[j] += e_h
            b = battery[j] + e_h
            if b > e_max:
                lost[j] += b - e_max
                b = e_max
            battery[j] = b

    # 2. deterministic duty schedule
    for j in range(n):
        if not genie and (t - offset[j]) % drx[j] < on[j]:
            state[j] = S1
        else:
            state[j] = S4

    # 3. at most one event per TTI
    event = rng.random() < alpha
    ex = np.nan
    ey = np.nan
    if event:
        ex = rng.random() * width
        ey = rng.random() * height

    # 4-5. sensing, detection and transmission
    n_rep = 0
    n_failed = 0
    if not genie:
        for j in range(n):
            if state[j] == S1 and not spend(j, e_idle, battery, spent):
                state[j] = S4
        if event:
            for j in range(n):
                if state[j] == S1:
                    dx = x[j] - ex
                    dy = y[j] - ey
                    if rng.random() < math.exp(-eta * math.sqrt(dx * dx + dy * dy)):
                        state[j] = S2
            for j in range(n):
                if state[j] == S2:
                    if spend(j, e_tx, battery, spent):
                        state[j] = S3
                        dx = x[j] - ex
                        dy = y[j] - ey
                        rep_idx[n_rep] = j
                        rep_info[n_rep] = psi * math.exp(-eta * math.sqrt(dx * dx + dy * dy))
                        n_rep += 1
                    else:
                        state[j] = S4
                        n_failed += 1
    elif event:
        g = 0
        best_d = np.inf
        for j in range(n):
            dx = x[j] - ex
            dy = y[j] - ey
            d = math.sqrt(dx * dx + dy * dy)
            if d < best_d:
                best_d = d
                g = j
        state[g] = S2
        if spend(g, e_idle, battery, spent) and spend(g, e_tx, battery, spent):
            state[g] = S3
            rep_idx[0] = g
            rep_info[0] = psi * math.exp(-eta * best_d)
            n_rep = 1
        else:
            state[g] = S4
            n_failed = 1

    # 6. wake-up of correlated sleepers
    initial = 0.0
    for r in range(n_rep):
        if rep_info[r] > initial:
            initial = rep_info[r]
    final = initial
    n_cand = 0
    n_woken = 0
    if event and n_rep > 0 and initial < i_min:
        cand = np.empty(n, dtype=np.int64)
        for j in range(n):
            if state[j] == S4 and battery[j] >= e_tx:
                cand[n_cand] = j
                n_cand += 1
        final, n_woken = wakeup_core(
            ex, ey, rep_idx, rep_info, n_rep, cand, n_cand,
            x, y, battery, state, spent,
            eta, psi, i_min, p_thr, e_idle, e_tx, sensing, geometry, phi_cos, rng,
            order_buf, score_buf, woken_buf, delivered_buf,
        )
        for i in range(n_woken):
            if state[woken_buf[i]] == S4:
                n_failed += 1

    # census at the end of event handling; failed activations count as S2
    census[:] = 0
    for j in range(n):
        census[state[j] - 1] += 1
    census[1] += n_failed
    census[3] -= n_failed

    # 7. reporters fall back to their schedule
    for j in range(n):
        if state[j] == S3 or state[j] == S2:
            if not genie and (t - offset[j]) % drx[j] < on[j]:
                state[j] = S1
            else:
                state[j] = S4

    for j in range(n):
        energy += spent[j]
    return event, ex, ey, n_rep, initial, n_cand, n_woken, final, energy


@njit(cache=True)
def run_loop(
    n_burn, n_meter, x, y, battery, state, on, drx, offset, harvested, spent, lost,
    genie, p_h, e_h, e_max, alpha, width, height,
    eta, psi, i_min, p_thr, e_idle, e_tx, sensing, geometry, phi_cos, rng,
    record, tr_event, tr_ex, tr_ey, tr_nrep, tr_initial, tr_woken, tr_final, tr_energy, tr_census,
):
    """Burn-in then metered TTIs; returns ``(events, missed, info_sum, energy)``
    over the metered window. With ``record`` the per-TTI trace arrays are filled."""
    n = x.size
    rep_idx = np.empty(n, dtype=np.int64)
    rep_info = np.empty(n)
    order_buf = np.empty(n, dtype=np.int64)
    score_buf = np.empty(n)
    woken_buf = np.empty(n, dtype=np.int64)
    delivered_buf = np.empty(n)
    census = np.zeros(4, dtype=np.int64)
    events = 0
    missed = 0
    info_sum = 0.0
    total_energy = 0
    for t in range(n_burn + n_meter):
        ev, ex, ey, n_rep, initial, n_cand, n_woken, final, energy = step(
            t, x, y, battery, state, on, drx, offset, harvested, spent, lost,
            genie, p_h, e_h, e_max, alpha, width, height,
            eta, psi, i_min, p_thr, e_idle, e_tx, sensing, geometry, phi_cos, rng,
            rep_idx, rep_info, order_buf, score_buf, woken_buf, delivered_buf, census,
        )
        if t < n_burn:
            continue
        k = t - n_burn
        total_energy += energy
        if ev:
            events += 1
            info_sum += final
            if final <= 0.0:
                missed += 1
        if record:
            tr_event[k] = ev
            tr_ex[k] = ex
            tr_ey[k] = ey
            tr_nrep[k] = n_rep
            tr_initial[k] = initial
            tr_woken[k] = n_woken
            tr_final[k] = final
            tr_energy[k] = energy
            tr_census[k, :] = census
    return events, missed, info_sum, total_energy


@njit(cache=True)
def chain_occupancy(P, start, n_steps, rng):
    """Empirical state frequencies of a sampled trajectory of the chain ``P``."""
    n = P.shape[0]
    cum = np.empty_like(P)
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += P[i, k]
            cum[i, k] = acc
    counts = np.zeros(n, dtype=np.int64)
    s = start
    for _ in range(n_steps):
        u = rng.random() * cum[s, n - 1]
        nxt = n - 1
        for k in range(n):
            if u < cum[s, k]:
                nxt = k
                break
        s = nxt
        counts[s] += 1
    return counts


@njit(cache=True)
def device_chain_run(P, e_idle, e_tx, e_max, p_h, e_h, n_steps, rng):
    """Single device on the four-state chain with a real battery.

    The S2 -> S3 branch is decided by the battery (>= e_tx) instead of the
    matrix entry; every other transition is sampled from ``P``. Per step the
    battery moves by harvest minus the cost of the new state, clamped to
    [0, e_max]. Returns state counts and battery-level counts.
    """
    state_counts = np.zeros(4, dtype=np.int64)
    level_counts = np.zeros(e_max + 1, dtype=np.int64)
    s = 0
    b = e_max
    for _ in range(n_steps):
        if s == 1:
            nxt = 2 if b >= e_tx else 3
        else:
            u = rng.random()
            acc = 0.0
            nxt = 3
            for k in range(4):
                acc += P[s, k]
                if u < acc:
                    nxt = k
                    break
        s = nxt
        cost = 0
        if s == 0 or s == 1:
            cost = e_idle
        elif s == 2:
            cost = e_tx
        gain = e_h if rng.random() < p_h else 0
        b = min(e_max, max(0, b + gain - cost))
        state_counts[s] += 1
        level_counts[b] += 1
    return state_counts, level_counts
