"""The four heartbeat-retrieval architectures.

* simple_p2p     -- every update cycle polls each subscribed target directly.
* transitive_p2p -- direct polls, but an alive responder piggybacks its own
                    fresh cache entries about nodes the requester also
                    watches; fresh-enough entries are not re-polled, so
                    observation ages accumulate across hops.
* central        -- requesters ask one of a few provider nodes, which serve
                    from a cache no older than the staleness threshold and
                    re-fetch stale entries upstream; providers may cap the
                    requests they accept per whole second.
* hierarchical   -- a balanced aggregator tree; each aggregator serves its
                    subtree from cache, polls its own group directly, and
                    forwards anything else towards the root, caching replies
                    on the way back.

``poll_subscriptions`` is the readable contract implementation.
``make_poller`` returns a per-run closure with the same observable
behaviour, tightened for the hot simulation loop (the equivalence is
covered by unit tests and the brute-force reference comparison).

Staleness convention everywhere: an entry observed at ``ob`` is fresh at
time ``now`` iff ``now - ob <= staleness_s``; only fresh entries are
relayed, and relays keep the original observation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .datacenter import DataCenter

CENTRAL = "central"
HIERARCHICAL = "hierarchical"
SIMPLE_P2P = "simple_p2p"
TRANSITIVE_P2P = "transitive_p2p"
PROTOCOL_KINDS = (CENTRAL, HIERARCHICAL, SIMPLE_P2P, TRANSITIVE_P2P)


@dataclass
class ProtocolConfig:
    kind: str = SIMPLE_P2P
    staleness_s: float = 1.0
    provider_count: int = 1          # central only
    hierarchy_levels: int = 2        # hierarchical only
    max_requests_per_s: int | None = None

    def validate(self, n: int) -> None:
        if self.kind not in PROTOCOL_KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.staleness_s <= 0:
            raise ValueError("staleness_s must be positive")
        if self.kind == CENTRAL and not 1 <= self.provider_count <= n:
            raise ValueError(f"provider_count must be in [1, {n}]")
        if self.kind == HIERARCHICAL and self.hierarchy_levels < 2:
            raise ValueError("hierarchy_levels must be >= 2")
        if self.max_requests_per_s is not None and self.max_requests_per_s < 1:
            raise ValueError("max_requests_per_s must be >= 1 when set")


@dataclass
class GlobalView:
    """Connection/referral state for the centralised topologies.

    ``cache`` maps provider -> target -> (alive, observed_at).  ``served``
    maps provider -> [second, count] and implements the per-whole-second
    request cap.  The tree fields are empty for the central kind.
    """
    providers: list[int] = field(default_factory=list)
    cache: dict[int, dict[int, tuple[bool, float]]] = field(default_factory=dict)
    served: dict[int, list[int]] = field(default_factory=dict)
    leaf_agg: list[int] | None = None
    parent: dict[int, int | None] = field(default_factory=dict)
    agg_children: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)
    ranges: dict[int, tuple[int, int]] = field(default_factory=dict)
    root: int | None = None


def build_global_view(n: int, cfg: ProtocolConfig, topology_stream=None) -> GlobalView:
    """Lay out providers (central) or the aggregator tree (hierarchical).

    The layout is deterministic and seed-independent: providers are the
    lowest node ids, groups are consecutive id ranges with fan-out
    ceil(n^(1/levels)), and each group's aggregator is its lowest id.
    """
    if cfg.kind == CENTRAL:
        providers = list(range(cfg.provider_count))
        return GlobalView(
            providers=providers,
            cache={p: {} for p in providers},
            served={p: [-1, 0] for p in providers},
        )
    if cfg.kind != HIERARCHICAL:
        raise ValueError("global view applies only to central/hierarchical")

    gv = GlobalView()
    if n == 1:
        gv.leaf_agg = [0]
        gv.ranges = {0: (0, 1)}
        gv.parent = {0: None}
        gv.agg_children = {0: []}
        gv.root = 0
        gv.cache = {0: {}}
        gv.served = {0: [-1, 0]}
        return gv

    fan_out = max(2, math.ceil(n ** (1.0 / cfg.hierarchy_levels)))
    gv.leaf_agg = [(i // fan_out) * fan_out for i in range(n)]
    current = list(range(0, n, fan_out))
    for agg in current:
        gv.ranges[agg] = (agg, min(agg + fan_out, n))
        gv.agg_children[agg] = []
        gv.parent[agg] = None
    while len(current) > 1:
        nxt = []
        for j in range(0, len(current), fan_out):
            group = current[j:j + fan_out]
            head = group[0]
            lo = gv.ranges[group[0]][0]
            hi = gv.ranges[group[-1]][1]
            for member in group[1:]:
                gv.parent[member] = head
                gv.agg_children[head].append((member, *gv.ranges[member]))
            gv.ranges[head] = (lo, hi)
            nxt.append(head)
        current = nxt
    gv.root = current[0]
    gv.cache = {a: {} for a in gv.agg_children}
    gv.served = {a: [-1, 0] for a in gv.agg_children}
    return gv


# -- direct polling ----------------------------------------------------

def direct_poll(dc: DataCenter, requester: int, target: int, now: float):
    """Poll one node directly: the request always costs a message, the
    reply only exists when the target is alive (silence means dead), and
    either way the requester learns the target's state as of ``now``."""
    dc.message(requester, target, now)
    alive = dc.alive[target]
    if alive:
        dc.message(target, requester, now)
    if target in dc.sub_slot[requester]:
        dc.apply_observation(requester, target, alive, now)
    return alive, now


def _fallback_direct(dc: DataCenter, requester: int, now: float) -> None:
    # provider/aggregator unreachable or refusing: keep the cycle alive
    # with plain direct polls
    for target in dc.subs[requester]:
        direct_poll(dc, requester, target, now)


# -- transitive P2P ----------------------------------------------------

def transitive_poll(dc: DataCenter, requester: int, cfg: ProtocolConfig, now: float) -> None:
    """One transitive update cycle, targets visited in ascending id order.

    Targets whose cached entry is still fresh are skipped, including
    freshness gained from piggybacks earlier in this same cycle.  An alive
    responder's reply carries its fresh entries about nodes the requester
    also subscribes to (the response payload); the requester applies them
    with the responder's original observation times.
    """
    thr = cfg.staleness_s
    cut = now - thr
    subs_r = dc.subs[requester]
    obs_r = dc.observed[requester]
    slot_of = dc.sub_slot[requester]
    for s, target in enumerate(subs_r):
        if obs_r[s] >= cut:
            continue
        dc.message(requester, target, now)
        if not dc.alive[target]:
            dc.apply_observation(requester, target, False, now)
            continue
        obs_t = dc.observed[target]
        bel_t = dc.believed[target]
        subs_t = dc.subs[target]
        carried = [j for j, u in enumerate(subs_t)
                   if obs_t[j] >= cut and u in slot_of]
        dc.message(target, requester, now, payload_entries=len(carried))
        dc.apply_observation(requester, target, True, now)
        for j in carried:
            dc.apply_observation(requester, subs_t[j], bel_t[j], obs_t[j])


# -- central -----------------------------------------------------------

def provider_serve(gv: GlobalView, provider: int, requester_targets, cfg: ProtocolConfig,
                   dc: DataCenter, now: float, local: bool = False):
    """Serve a batch of targets from a provider's cache.

    Entries missing or older than the staleness threshold are re-fetched
    with an upstream direct poll first.  Returns the (target, alive,
    observed_at) list, or None when the per-second request cap refuses the
    call.  ``local`` lookups (a provider serving itself) bypass the cap
    and its counter.
    """
    if not local:
        counter = gv.served[provider]
        sec = int(now)
        if counter[0] != sec:
            counter[0] = sec
            counter[1] = 0
        cap = cfg.max_requests_per_s
        if cap is not None and counter[1] >= cap:
            return None
        counter[1] += 1
    cache = gv.cache[provider]
    thr = cfg.staleness_s
    out = []
    for target in requester_targets:
        if target == provider:
            entry = (True, now)        # a provider knows its own state
            cache[target] = entry
        else:
            entry = cache.get(target)
            if entry is None or now - entry[1] > thr:
                dc.message(provider, target, now)
                alive = dc.alive[target]
                if alive:
                    dc.message(target, provider, now)
                entry = (alive, now)
                cache[target] = entry
        out.append((target, entry[0], entry[1]))
    return out


def central_poll(dc: DataCenter, requester: int, cfg: ProtocolConfig,
                 gv: GlobalView, now: float) -> None:
    """Ask the assigned provider (requester index mod provider count) for
    the whole target set; fall back to direct polls for this cycle when
    the provider is dead or refuses."""
    provider = gv.providers[requester % len(gv.providers)]
    targets = dc.subs[requester]
    if not targets:
        return
    if provider == requester:
        served = provider_serve(gv, provider, targets, cfg, dc, now, local=True)
        _apply_served(dc, requester, served)
        return
    dc.message(requester, provider, now)
    if not dc.alive[provider]:
        _fallback_direct(dc, requester, now)
        return
    served = provider_serve(gv, provider, targets, cfg, dc, now)
    if served is None:
        _fallback_direct(dc, requester, now)
        return
    dc.message(provider, requester, now, payload_entries=len(served))
    _apply_served(dc, requester, served)


def _apply_served(dc: DataCenter, requester: int, served) -> None:
    for target, alive, observed_at in served:
        dc.apply_observation(requester, target, alive, observed_at)


# -- hierarchical ------------------------------------------------------

def _serve_at_aggregator(dc: DataCenter, gv: GlobalView, cfg: ProtocolConfig,
                         agg: int, targets, now: float, local: bool):
    """Resolve a target batch at one aggregator.

    Fresh cache entries answer immediately.  Stale targets in the
    aggregator's own leaf group are polled directly; others are batched
    and forwarded to the covering child aggregator (or the parent when
    outside this subtree), and replies are cached here with their original
    observation times.  A dead or refusing next hop makes this aggregator
    poll those targets itself.  Returns None only on cap refusal.
    """
    if not local:
        counter = gv.served[agg]
        sec = int(now)
        if counter[0] != sec:
            counter[0] = sec
            counter[1] = 0
        cap = cfg.max_requests_per_s
        if cap is not None and counter[1] >= cap:
            return None
        counter[1] += 1
    cache = gv.cache[agg]
    thr = cfg.staleness_s
    lo, hi = gv.ranges[agg]
    leaf_agg = gv.leaf_agg
    out: dict[int, tuple[bool, float]] = {}
    forward: dict[int, list[int]] = {}
    direct: list[int] = []
    for target in targets:
        if target == agg:
            entry = (True, now)
            cache[target] = entry
            out[target] = entry
            continue
        entry = cache.get(target)
        if entry is not None and now - entry[1] <= thr:
            out[target] = entry
            continue
        if leaf_agg[target] == agg:
            direct.append(target)
        elif lo <= target < hi:
            for child, clo, chi in gv.agg_children[agg]:
                if clo <= target < chi:
                    forward.setdefault(child, []).append(target)
                    break
        else:
            forward.setdefault(gv.parent[agg], []).append(target)
    for target in direct:
        dc.message(agg, target, now)
        alive = dc.alive[target]
        if alive:
            dc.message(target, agg, now)
        entry = (alive, now)
        cache[target] = entry
        out[target] = entry
    for hop in sorted(forward):
        batch = forward[hop]
        dc.message(agg, hop, now)
        answered = False
        if dc.alive[hop]:
            sub = _serve_at_aggregator(dc, gv, cfg, hop, batch, now, local=False)
            if sub is not None:
                dc.message(hop, agg, now, payload_entries=len(batch))
                for target, alive, observed_at in sub:
                    entry = (alive, observed_at)
                    cache[target] = entry
                    out[target] = entry
                answered = True
        if not answered:
            for target in batch:
                dc.message(agg, target, now)
                alive = dc.alive[target]
                if alive:
                    dc.message(target, agg, now)
                entry = (alive, now)
                cache[target] = entry
                out[target] = entry
    return [(t, out[t][0], out[t][1]) for t in sorted(out)]


def hierarchical_poll(dc: DataCenter, requester: int, cfg: ProtocolConfig,
                      gv: GlobalView, now: float) -> None:
    """Ask the requester's group aggregator for the whole target set."""
    agg = gv.leaf_agg[requester]
    targets = dc.subs[requester]
    if not targets:
        return
    if agg == requester:
        served = _serve_at_aggregator(dc, gv, cfg, agg, targets, now, local=True)
        _apply_served(dc, requester, served)
        return
    dc.message(requester, agg, now)
    if not dc.alive[agg]:
        _fallback_direct(dc, requester, now)
        return
    served = _serve_at_aggregator(dc, gv, cfg, agg, targets, now, local=False)
    if served is None:
        _fallback_direct(dc, requester, now)
        return
    dc.message(agg, requester, now, payload_entries=len(served))
    _apply_served(dc, requester, served)


# -- dispatch ----------------------------------------------------------

def poll_subscriptions(dc: DataCenter, node: int, cfg: ProtocolConfig,
                       gv: GlobalView | None, now: float) -> None:
    """Run one update cycle for ``node`` under the configured protocol.

    Dead nodes do not poll (their update events are no-ops).  Every cached
    entry of the node ends at least as fresh as it started, and all
    traffic lands in the data centre's load log.
    """
    if not dc.alive[node]:
        return
    kind = cfg.kind
    if kind == SIMPLE_P2P:
        for target in dc.subs[node]:
            direct_poll(dc, node, target, now)
    elif kind == TRANSITIVE_P2P:
        transitive_poll(dc, node, cfg, now)
    elif kind == CENTRAL:
        if gv is None:
            raise ValueError("central protocol requires a GlobalView")
        central_poll(dc, node, cfg, gv, now)
    elif kind == HIERARCHICAL:
        if gv is None:
            raise ValueError("hierarchical protocol requires a GlobalView")
        hierarchical_poll(dc, node, cfg, gv, now)
    else:
        raise ValueError(f"unknown protocol kind {kind!r}")


# -- optimized per-run pollers ------------------------------------------

def _build_overlap_pairs(dc: DataCenter) -> list[list[tuple[tuple[int, int], ...] | None]]:
    """pairs[i][s]: for target b = subs[i][s], the (slot_in_b, slot_in_i)
    index pairs of subscriptions shared by i and b.  Static per topology;
    this is what makes piggyback relay O(overlap) instead of O(k)."""
    pairs = []
    subs = dc.subs
    sub_slot = dc.sub_slot
    for i in range(dc.n):
        subs_i = subs[i]
        row = []
        for b in subs_i:
            slots_b = sub_slot[b]
            pl = [(slots_b[u], m) for m, u in enumerate(subs_i) if u in slots_b]
            row.append(tuple(pl) if pl else None)
        pairs.append(row)
    return pairs


def make_poller(dc: DataCenter, cfg: ProtocolConfig, gv: GlobalView | None):
    """Build the fastest equivalent of poll_subscriptions for one run.

    The returned callable poll(node, now) assumes the node is alive (the
    event dispatcher checks) and that calls arrive in nondecreasing time.
    """
    kind = cfg.kind
    if kind == CENTRAL:
        return lambda node, now: central_poll(dc, node, cfg, gv, now)
    if kind == HIERARCHICAL:
        return lambda node, now: hierarchical_poll(dc, node, cfg, gv, now)
    if kind == SIMPLE_P2P:
        return _make_simple_poller(dc)
    if kind == TRANSITIVE_P2P:
        return _make_transitive_poller(dc, cfg.staleness_s)
    raise ValueError(f"unknown protocol kind {kind!r}")


def _make_simple_poller(dc: DataCenter):
    # Target-link accesses are deferred: each update adds 2 per subscription
    # (request + response) at window flush, minus one recorded immediately
    # per currently-dead target (no response from the dead).
    upd_counts = [0] * dc.n
    subs = dc.subs
    switch = dc.switch

    def flush(_window: int, _upd=upd_counts, _subs=subs, _wl=dc._win_msgs, _n=dc.n):
        for i in range(_n):
            c = _upd[i]
            if c:
                cc = 2 * c
                for t in _subs[i]:
                    _wl[t] += cc
                _upd[i] = 0

    dc.pre_flush = flush

    def poll(i, now, _dc=dc, _subs=subs, _alive=dc.alive, _believed=dc.believed,
             _observed=dc.observed, _dead=dc.dead_targets, _upd=upd_counts,
             _wl=dc._win_msgs, _bad=dc.bad_count, _switch=switch):
        _dc.advance_window(now)
        subs_i = _subs[i]
        nb = [_alive[t] for t in subs_i]
        k = len(subs_i)
        dead = _dead[i]
        resp = k - len(dead)
        _believed[i] = nb
        _observed[i] = [now] * k
        _upd[i] += 1
        if dead:
            for t in dead:
                _wl[t] -= 1
        traffic = k + resp
        _wl[i] += traffic
        _wl[_switch] += traffic
        _dc.total_messages += traffic
        if _bad[i]:
            _bad[i] = 0
            _dc.inconsistent -= 1

    return poll


def _make_transitive_poller(dc: DataCenter, staleness_s: float):
    pairs = _build_overlap_pairs(dc)

    def poll(i, now, _dc=dc, _subs=dc.subs, _alive=dc.alive, _believed=dc.believed,
             _observed=dc.observed, _pairs=pairs, _wl=dc._win_msgs, _wp=dc._win_pay,
             _bad=dc.bad_count, _switch=dc.switch, _thr=staleness_s):
        _dc.advance_window(now)
        cut = now - _thr
        subs_i = _subs[i]
        bel_i = _believed[i]
        obs_i = _observed[i]
        prs = _pairs[i]
        req = 0
        resp = 0
        pay = 0
        entry_bad = _bad[i]
        bad = entry_bad
        s = 0
        for o in obs_i:
            if o < cut:
                t = subs_i[s]
                a = _alive[t]
                req += 1
                if bel_i[s] != a:
                    bad -= 1
                    bel_i[s] = a
                obs_i[s] = now
                if a:
                    resp += 1
                    p = prs[s]
                    if p is None:
                        _wl[t] += 2
                    else:
                        obs_t = _observed[t]
                        bel_t = _believed[t]
                        carried = 0
                        for j, m in p:
                            ob = obs_t[j]
                            if ob >= cut:
                                carried += 1
                                if ob > obs_i[m]:
                                    v = bel_t[j]
                                    if bel_i[m] != v:
                                        truth = _alive[subs_i[m]]
                                        bad += (v != truth) - (bel_i[m] != truth)
                                        bel_i[m] = v
                                    obs_i[m] = ob
                        _wl[t] += 2
                        if carried:
                            _wp[t] += carried
                            pay += carried
                else:
                    _wl[t] += 1
            s += 1
        if req:
            traffic = req + resp
            _wl[i] += traffic
            _wl[_switch] += traffic
            _dc.total_messages += traffic
            if pay:
                _wp[i] += pay
                _wp[_switch] += pay
                _dc.total_payload += pay
            if bad != entry_bad:
                _bad[i] = bad
                if bad == 0:
                    _dc.inconsistent -= 1
                elif entry_bad == 0:
                    _dc.inconsistent += 1

    return poll
