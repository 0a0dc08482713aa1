"""Hot numeric kernels.

Everything here is written as plain Python over numpy arrays and
compiled with numba via :func:`nhopt.backend.jit`; with
``NHOPT_BACKEND=python`` the same source runs interpreted. Three kernel
groups live here:

* ``search_kernel`` — the branch-and-bound depth-first search over
  per-request placement choices, resumable on a node budget so callers
  can enforce wall-clock limits from Python.
* ``eval_options_kernel`` — odometer enumeration of per-request options
  (placements or raw bitmaps) with literal constraint evaluation; the
  compute engine behind the brute-force oracle.
* ``exhaustive_kernel`` / ``projection_kernel`` — 0-1 enumeration of a
  linearized model and the model-vs-validator feasible-set comparison.

Bit layout: PRB occupancy is packed into uint64 words, least-significant
bit first; the batch evaluators additionally require the whole PRB space
to fit one word (they only run on tiny certification instances).
"""

from __future__ import annotations

import numpy as np

from .backend import jit

U1 = np.uint64(1)
U0 = np.uint64(0)


@jit
def _popcount(v):
    n = 0
    while v:
        v &= v - U1
        n += 1
    return n


@jit
def _literal_violates(x_bits, y_bits, beta_bits, covers, demand, alpha_mask,
                      band_masks, pair_a, pair_b, single_band):
    """Whether any of the seven constraint families rejects the assignment.

    ``x_bits[i, b]`` packs request i's PRBs at site b (global index space,
    one word); ``y_bits`` is the 0/1 serving indicator. Evaluation follows
    the constraint formulas directly; families are tested in order with
    early exit, which is equivalent for a boolean verdict.
    """
    n_req, n_sites = x_bits.shape
    n_bands = band_masks.shape[0]

    # C1: each request served by at most one site
    for i in range(n_req):
        s = 0
        for b in range(n_sites):
            s += y_bits[i, b]
        if s > 1:
            return True

    # C2: per (site, prb) at most one request, only on supported positions
    for b in range(n_sites):
        seen = U0
        for i in range(n_req):
            m = x_bits[i, b]
            if m & ~beta_bits[b]:
                return True
            if m & seen:
                return True
            seen |= m

    # C3: interfering pairs never reuse a PRB (supported positions only).
    # Within-site multiplicity is already excluded by C2 above, so the
    # pairwise sum exceeds 1 exactly when both sites occupy the PRB.
    for p in range(pair_a.shape[0]):
        a = pair_a[p]
        c = pair_b[p]
        occ_a = U0
        occ_c = U0
        for i in range(n_req):
            occ_a |= x_bits[i, a] & beta_bits[a]
            occ_c |= x_bits[i, c] & beta_bits[c]
        if occ_a & occ_c:
            return True

    # C4: supported+covering PRB count equals demand * y
    for i in range(n_req):
        for b in range(n_sites):
            lhs = 0
            if covers[i, b]:
                lhs = _popcount(x_bits[i, b] & beta_bits[b])
            if lhs != demand[i] * y_bits[i, b]:
                return True

    # C5: no y or x mass at non-covering sites
    for i in range(n_req):
        for b in range(n_sites):
            if covers[i, b] == 0 and (y_bits[i, b] != 0 or x_bits[i, b] != U0):
                return True

    # C6: same-band adjacent-pair count equals (demand - 1) * y
    for i in range(n_req):
        for b in range(n_sites):
            m = x_bits[i, b]
            adj = _popcount(m & (m >> U1) & alpha_mask)
            if adj != (demand[i] - 1) * y_bits[i, b]:
                return True

    # C7: single-band sites use at most one band
    for b in range(n_sites):
        if single_band[b]:
            tot = 0
            for i in range(n_req):
                tot += _popcount(x_bits[i, b])
            if tot > 0:
                for w in range(n_bands):
                    inw = 0
                    for i in range(n_req):
                        inw += _popcount(x_bits[i, b] & band_masks[w])
                    if inw > 0 and tot - inw > 0:
                        return True
    return False


@jit
def eval_options_kernel(opt_ptr, opt_y_site, opt_x_site, opt_x_mask, weights,
                        beta_bits, covers, demand, alpha_mask, band_masks,
                        pair_a, pair_b, single_band, best_digits):
    """Enumerate the cartesian product of per-request options.

    An option is (y_site, x_site, x_mask); y_site < 0 leaves y unset.
    Combinations are visited in ascending lexicographic digit order (last
    request fastest), so keeping the first strictly-better feasible
    combination yields the lexicographically-smallest optimum under the
    caller's option ordering. Returns (best value, found flag, evaluated).
    """
    n_req = opt_ptr.shape[0] - 1
    n_sites = beta_bits.shape[0]
    digits = np.zeros(n_req, dtype=np.int64)
    x_bits = np.zeros((n_req, n_sites), dtype=np.uint64)
    y_bits = np.zeros((n_req, n_sites), dtype=np.uint8)
    best_val = 0.0
    found = False
    evaluated = 0
    while True:
        for i in range(n_req):
            for b in range(n_sites):
                x_bits[i, b] = U0
                y_bits[i, b] = 0
        for i in range(n_req):
            o = opt_ptr[i] + digits[i]
            if opt_y_site[o] >= 0:
                y_bits[i, opt_y_site[o]] = 1
            if opt_x_mask[o] != U0:
                x_bits[i, opt_x_site[o]] |= opt_x_mask[o]
        evaluated += 1
        if not _literal_violates(x_bits, y_bits, beta_bits, covers, demand,
                                 alpha_mask, band_masks, pair_a, pair_b, single_band):
            v = 0.0
            for i in range(n_req):
                if opt_y_site[opt_ptr[i] + digits[i]] >= 0:
                    v += weights[i]
            if (not found) or v > best_val:
                found = True
                best_val = v
                for i in range(n_req):
                    best_digits[i] = digits[i]
        k = n_req - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < opt_ptr[k + 1] - opt_ptr[k]:
                break
            digits[k] = 0
            k -= 1
        if k < 0:
            break
    return best_val, found, evaluated


@jit
def _placement_legal(j, p_site, p_band, p_mask, occ, nbr_ptr, nbr_idx,
                     single_band, site_total, site_band_cnt, w64):
    s = p_site[j]
    if single_band[s] and site_total[s] > 0 and site_band_cnt[s, p_band[j]] != site_total[s]:
        return False
    for w in range(w64):
        m = p_mask[j, w]
        if m and (occ[s, w] & m):
            return False
    for t in range(nbr_ptr[s], nbr_ptr[s + 1]):
        s2 = nbr_idx[t]
        for w in range(w64):
            m = p_mask[j, w]
            if m and (occ[s2, w] & m):
                return False
    return True


#: Legality counts are capped here: for branching we only need to know
#: which undecided request is most constrained, and any count at the cap
#: ties as "unconstrained".
_COUNT_CAP = 3


@jit
def _scan_undecided(decided, weights, req_ptr, p_site, p_band, p_mask, occ,
                    nbr_ptr, nbr_idx, single_band, site_total, site_band_cnt,
                    w64, cur, unplaceable):
    """One pass over the undecided requests.

    Returns (bound, pick, n_unplaceable): the admissible bound "current
    value plus the weight of every undecided request that still has a
    conflict-free placement", the most-constrained undecided request
    (fewest legal placements, capped; ties by larger weight, then lower
    id), and — written into ``unplaceable`` — the positive-weight requests
    with no legal placement left (the bound's failure witnesses).
    """
    val = cur
    pick = -1
    pick_cnt = _COUNT_CAP + 1
    pick_w = -1.0
    n_req = decided.shape[0]
    n_unplaceable = 0
    for r in range(n_req):
        if decided[r]:
            continue
        cnt = 0
        for j in range(req_ptr[r], req_ptr[r + 1]):
            if _placement_legal(j, p_site, p_band, p_mask, occ, nbr_ptr, nbr_idx,
                                single_band, site_total, site_band_cnt, w64):
                cnt += 1
                if cnt >= _COUNT_CAP:
                    break
        if weights[r] > 0.0:
            if cnt > 0:
                val += weights[r]
            else:
                unplaceable[n_unplaceable] = r
                n_unplaceable += 1
        if cnt < pick_cnt or (cnt == pick_cnt and weights[r] > pick_w):
            pick = r
            pick_cnt = cnt
            pick_w = weights[r]
    return val, pick, n_unplaceable


@jit
def _jump_target(reason_row, rw, d):
    """Highest depth strictly below ``d`` present in the reason set, or -1."""
    for e in range(d - 1, -1, -1):
        if (reason_row[e >> 6] >> np.uint64(e & 63)) & U1:
            return e
    return -1


#: Pressure-ordered candidate keys pack (pressure, offset) into one int64.
_KEY_BASE = 1 << 20


@jit
def _fill_candidates(d, r, spread, req_ptr, p_site, p_band, p_mask, band_masks_mw,
                     occ, nbr_ptr, nbr_idx, single_band, site_total,
                     site_band_cnt, w64, cand, cand_cnt, keybuf):
    """Collect the legal placements of request ``r`` as the node's children.

    With ``spread`` set they are ordered least-loaded-first: ascending count
    of occupied PRBs in the placement's band across the placement site and
    its interference neighbors (ties by placement array order), which
    steers the dive away from contended spectrum. Without it, array order
    (site, band, start) is kept.
    """
    base = req_ptr[r]
    m = 0
    last_site = -1
    last_band = -1
    pressure = 0
    for j in range(base, req_ptr[r + 1]):
        if not _placement_legal(j, p_site, p_band, p_mask, occ, nbr_ptr, nbr_idx,
                                single_band, site_total, site_band_cnt, w64):
            continue
        if spread:
            s = p_site[j]
            band = p_band[j]
            if s != last_site or band != last_band:
                pressure = 0
                for w in range(w64):
                    merged = occ[s, w]
                    for t in range(nbr_ptr[s], nbr_ptr[s + 1]):
                        merged |= occ[nbr_idx[t], w]
                    pressure += _popcount(merged & band_masks_mw[band, w])
                last_site = s
                last_band = band
            keybuf[m] = pressure * _KEY_BASE + (j - base)
        else:
            keybuf[m] = j - base
        m += 1
    order = np.argsort(keybuf[:m])
    for t in range(m):
        cand[d, t] = base + keybuf[order[t]] % _KEY_BASE
    cand_cnt[d] = m


@jit
def search_kernel(weights, req_ptr, p_site, p_band, p_mask, nbr_ptr, nbr_idx,
                  single_band, blocker_sites, band_masks_mw, order, n_active,
                  dynamic, mode, target, node_budget, occ, site_total,
                  site_band_cnt, decided, seq, choice, applied, cur_val,
                  node_bound, reason, scratch, cand, cand_cnt, keybuf,
                  best_choice, best_val, icounters):
    """Depth-first branch-and-bound over per-request placement decisions.

    Each node decides one request: with ``dynamic`` set, the undecided
    request with the fewest currently-legal placements (fail-first); else
    the request ``order[depth]``. Children are the request's placements in
    array order followed by an explicit reject branch. ``n_active`` is the
    number of requests left to decide; entries pre-marked in ``decided``
    are treated as already settled (their spectrum must be pre-applied to
    the occupancy state).

    ``mode`` 0 maximizes: prune when bound <= incumbent, finish early when
    the incumbent meets the root bound. mode 1 searches for the first
    solution whose value equals ``target`` exactly, pruning when
    bound < target — with ``dynamic`` off and ``order`` the identity it
    visits decision vectors in lexicographic order, so the first hit is
    the lexicographically-smallest solution achieving the target.

    Failed subtrees backjump: every prune records which ancestor depths
    its proof depends on (rejections, plus placements at sites that can
    block an unplaceable or branched request, per ``blocker_sites``), and
    an exhausted node jumps straight to the deepest depth in its
    accumulated reason set — siblings of the skipped ancestors cannot
    repair the failure, so the optimum is preserved.

    State lives in the caller's arrays; the kernel pauses after
    ``node_budget`` node entries (when positive) and can be re-invoked to
    resume. icounters = [depth, nodes, prunes, found]. Returns 0 when the
    search is complete, 1 when paused.
    """
    w64 = occ.shape[1]
    rw = reason.shape[1]
    d = icounters[0]
    nodes_this_call = 0
    jump = -2  # backjump target; -2 inactive (never a valid depth)
    while d >= 0:
        if d == n_active:
            v = cur_val[d]
            if mode == 0:
                if v > best_val[0]:
                    best_val[0] = v
                    for e in range(n_active):
                        best_choice[seq[e]] = applied[e]
                    if n_active > 0 and v >= node_bound[0]:
                        icounters[3] = 1
                        icounters[0] = -1
                        return 0
            elif v == target:
                best_val[0] = v
                for e in range(n_active):
                    best_choice[seq[e]] = applied[e]
                icounters[3] = 1
                icounters[0] = -1
                return 0
            # a completed leaf depends on every decision: full reason set
            for w in range(rw):
                reason[d, w] = U0
            for e in range(n_active):
                reason[d, e >> 6] |= U1 << np.uint64(e & 63)
            d -= 1
            continue
        if choice[d] == -1:
            if node_budget > 0 and nodes_this_call >= node_budget:
                icounters[0] = d
                return 1
            nodes_this_call += 1
            icounters[1] += 1
            nb, pick, n_unpl = _scan_undecided(
                decided, weights, req_ptr, p_site, p_band, p_mask, occ,
                nbr_ptr, nbr_idx, single_band, site_total, site_band_cnt,
                w64, cur_val[d], scratch)
            node_bound[d] = nb
            if (mode == 0 and nb <= best_val[0]) or (mode == 1 and nb < target):
                icounters[2] += 1
                # reason: rejected ancestors (value lost) plus ancestors whose
                # placements can block one of the unplaceable requests
                for w in range(rw):
                    reason[d, w] = U0
                for e in range(d):
                    if applied[e] < 0:
                        reason[d, e >> 6] |= U1 << np.uint64(e & 63)
                    else:
                        s = p_site[applied[e]]
                        for u in range(n_unpl):
                            row = scratch[u]
                            if (blocker_sites[row, s >> 6] >> np.uint64(s & 63)) & U1:
                                reason[d, e >> 6] |= U1 << np.uint64(e & 63)
                                break
                jump = _jump_target(reason[d], rw, d)
                d -= 1
                continue
            seq[d] = pick if dynamic else order[d]
            decided[seq[d]] = 1
            choice[d] = 0
            for w in range(rw):
                reason[d, w] = U0
            # occupancy above a node is identical whenever control returns
            # to it, so its legal children can be collected once
            _fill_candidates(d, seq[d], dynamic, req_ptr, p_site, p_band, p_mask,
                             band_masks_mw, occ, nbr_ptr, nbr_idx, single_band,
                             site_total, site_band_cnt, w64, cand, cand_cnt, keybuf)
        else:
            r = seq[d]
            c = choice[d]
            if c < cand_cnt[d]:
                j = cand[d, c]
                s = p_site[j]
                for w in range(w64):
                    occ[s, w] &= ~p_mask[j, w]
                site_total[s] -= 1
                site_band_cnt[s, p_band[j]] -= 1
            for w in range(rw):
                reason[d, w] |= reason[d + 1, w]
            if jump != -2 and jump < d:
                # mid-backjump: fail this node without trying siblings
                decided[r] = 0
                choice[d] = -1
                d -= 1
                continue
            jump = -2
            choice[d] = c + 1
            if mode == 0 and node_bound[d] <= best_val[0]:
                # incumbent improved past this node's bound; conservative
                # full reason (the improvement may rest on any decision)
                icounters[2] += 1
                for e in range(d):
                    reason[d, e >> 6] |= U1 << np.uint64(e & 63)
                decided[r] = 0
                choice[d] = -1
                d -= 1
                continue
        r = seq[d]
        if choice[d] <= cand_cnt[d]:
            if choice[d] < cand_cnt[d]:
                j = cand[d, choice[d]]
                s = p_site[j]
                for w in range(w64):
                    occ[s, w] |= p_mask[j, w]
                site_total[s] += 1
                site_band_cnt[s, p_band[j]] += 1
                applied[d] = j
                cur_val[d + 1] = cur_val[d] + weights[r]
            else:
                applied[d] = -1
                cur_val[d + 1] = cur_val[d]
            choice[d + 1] = -1
            d += 1
        else:
            # children exhausted; future legality of this request's skipped
            # placements depends on ancestors at its blocker sites
            for e in range(d):
                if applied[e] >= 0:
                    s = p_site[applied[e]]
                    if (blocker_sites[r, s >> 6] >> np.uint64(s & 63)) & U1:
                        reason[d, e >> 6] |= U1 << np.uint64(e & 63)
            decided[r] = 0
            choice[d] = -1
            jump = _jump_target(reason[d], rw, d)
            d -= 1
    icounters[0] = -1
    return 0


@jit
def exhaustive_kernel(n_vars, c_ptr, c_var, c_coef, c_sense, c_rhs, obj_coef):
    """Exact optimum of a 0-1 program by complete enumeration.

    Senses: 0 is <=, 1 is >=, 2 is ==. Coefficients are expected to be
    integral so float comparisons are exact. Keeps the first strictly
    better assignment, i.e. the one with the smallest bit-pattern (bit j
    of the mask is variable j). Returns (found, best value, best mask).
    """
    n_cons = c_ptr.shape[0] - 1
    best_val = 0.0
    best_mask = U0
    found = False
    total = U1 << np.uint64(n_vars)
    m = U0
    while m < total:
        feasible = True
        for c in range(n_cons):
            s = 0.0
            for t in range(c_ptr[c], c_ptr[c + 1]):
                if (m >> np.uint64(c_var[t])) & U1:
                    s += c_coef[t]
            sense = c_sense[c]
            if sense == 0:
                if s > c_rhs[c]:
                    feasible = False
                    break
            elif sense == 1:
                if s < c_rhs[c]:
                    feasible = False
                    break
            elif s != c_rhs[c]:
                feasible = False
                break
        if feasible:
            v = 0.0
            for j in range(n_vars):
                if (m >> np.uint64(j)) & U1:
                    v += obj_coef[j]
            if (not found) or v > best_val:
                found = True
                best_val = v
                best_mask = m
        m += U1
    return found, best_val, best_mask


@jit
def projection_kernel(xy_is_x, xy_req, xy_site, xy_prb, xy_model_idx, n_model,
                      z_idx, z_left, z_right, u_idx, u_ptr, u_members,
                      c_ptr, c_var, c_coef, c_sense, c_rhs,
                      n_req, n_sites, beta_bits, covers, demand, alpha_mask,
                      band_masks, pair_a, pair_b, single_band):
    """Compare the linearized model's (x, y) projection with the validator.

    Enumerates every 0-1 assignment of the model's x and y variables,
    completes the auxiliaries canonically (z as the product of its two
    factors, each band-use u as the usage indicator — both are forced at
    binary points whenever any feasible completion exists), evaluates all
    model rows, and compares against the literal constraint check.
    Returns -1 when the two feasible sets coincide, else the first
    differing assignment mask.
    """
    n_xy = xy_is_x.shape[0]
    vals = np.zeros(n_model, dtype=np.uint8)
    x_bits = np.zeros((n_req, n_sites), dtype=np.uint64)
    y_bits = np.zeros((n_req, n_sites), dtype=np.uint8)
    total = np.int64(1) << np.int64(n_xy)
    for m in range(total):
        for v in range(n_model):
            vals[v] = 0
        for q in range(n_xy):
            vals[xy_model_idx[q]] = (m >> q) & 1
        for t in range(z_idx.shape[0]):
            vals[z_idx[t]] = vals[z_left[t]] & vals[z_right[t]]
        for t in range(u_idx.shape[0]):
            used = 0
            for k in range(u_ptr[t], u_ptr[t + 1]):
                if vals[u_members[k]]:
                    used = 1
                    break
            vals[u_idx[t]] = used
        model_ok = True
        for c in range(c_ptr.shape[0] - 1):
            s = 0.0
            for t in range(c_ptr[c], c_ptr[c + 1]):
                if vals[c_var[t]]:
                    s += c_coef[t]
            sense = c_sense[c]
            if sense == 0:
                if s > c_rhs[c]:
                    model_ok = False
                    break
            elif sense == 1:
                if s < c_rhs[c]:
                    model_ok = False
                    break
            elif s != c_rhs[c]:
                model_ok = False
                break
        for i in range(n_req):
            for b in range(n_sites):
                x_bits[i, b] = U0
                y_bits[i, b] = 0
        for q in range(n_xy):
            if (m >> q) & 1:
                if xy_is_x[q]:
                    x_bits[xy_req[q], xy_site[q]] |= U1 << np.uint64(xy_prb[q])
                else:
                    y_bits[xy_req[q], xy_site[q]] = 1
        truth_ok = not _literal_violates(x_bits, y_bits, beta_bits, covers,
                                         demand, alpha_mask, band_masks,
                                         pair_a, pair_b, single_band)
        if model_ok != truth_ok:
            return m
    return np.int64(-1)
