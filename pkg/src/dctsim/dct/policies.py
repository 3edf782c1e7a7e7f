"""Contact-tracing policies built on the shared message substrate.

Every policy exposes the same driver surface so the engine stays
policy-agnostic: ``new_day`` shifts day windows and records the day's
symptom reports, ``process_round`` reacts to one message-delivery round,
``current_risk`` is the payload each agent would attach to an outgoing
encounter message, ``recommendation`` maps internal state to behavior
levels 0..3, and ``pop_new_alerts`` drains agents whose recommendation
first reached moderate-or-higher (candidates for test seeking).

Binary tracing reacts to confirmed-positive notifications only (with an
optional one-hop rebroadcast at a dedicated marker level); the heuristic
maintains a full quantized risk history per agent from test results,
reported symptoms, and received messages.
"""

import numpy as np

from ..config import ConfigError, DctConfig
from ..disease import SYMPTOM_INDEX, SYMPTOMS
from ..health_system import NO_DAY

_BIG = 10 ** 9


def symptom_tier_table(tiers_high, tiers_moderate):
    """Informativeness tier (3/2/1) per symptom index.

    Anything not named in either list reports at the mild tier.
    """
    unknown = (set(tiers_high) | set(tiers_moderate)) - set(SYMPTOMS)
    if unknown:
        raise ConfigError(
            f"unknown symptom names in tier config: {sorted(unknown)}")
    tiers = np.ones(len(SYMPTOMS), dtype=np.int8)
    for name in tiers_moderate:
        tiers[SYMPTOM_INDEX[name]] = 2
    for name in tiers_high:
        tiers[SYMPTOM_INDEX[name]] = 3
    return tiers


def heuristic_risk_update(T, S_class, msg_oldest, msg_newest, r_prev, *,
                          r_mild=6, r_moderate=10, r_high=12, levels=16,
                          horizon_high=7, horizon_moderate=4,
                          horizon_mild=1, negative_window=8):
    """One vectorized risk recomputation over aligned day windows.

    T: [m, W] test results in {+1, 0, -1} (offset 0 = today).
    S_class: [m, W] reported-symptom tier per day, 0 none / 1 mild /
        2 moderate / 3 high.
    msg_oldest / msg_newest: [m, levels] day offsets of the oldest and
        newest stored message receipt per payload level, -1 where none.
    r_prev: [m, W] previous risk history shifted to today's alignment.

    Returns (risk [m, W] int16, zeta [m] int8). Rule order: a positive
    test pins the whole window at the top level; symptom tiers write the
    last W/2 days; received messages write back to the earliest receipt
    of their class, one class step down; with no recent evidence the
    recent half of the history resets instead of merging; a negative
    test (only when no positive is present) zeroes half the window
    around its report day and clears the recommendation if today ends
    at zero.
    """
    T = np.atleast_2d(np.asarray(T))
    S_class = np.atleast_2d(np.asarray(S_class))
    msg_oldest = np.atleast_2d(np.asarray(msg_oldest))
    msg_newest = np.atleast_2d(np.asarray(msg_newest))
    r_prev = np.atleast_2d(np.asarray(r_prev))
    m, W = T.shape
    half = W // 2
    r_max = levels - 1
    offs = np.arange(W)

    has_pos = (T == 1).any(axis=1)
    has_neg = (T == -1).any(axis=1)

    # test results: any positive pins everything
    r_t = np.where(has_pos[:, None], r_max, 0)
    zeta_t = np.where(has_pos, 3, 0)

    # symptoms: most informative tier anywhere in the window decides the
    # branch; the assignment covers the recent half
    tier = S_class.max(axis=1)
    tier_level = np.array([0, r_mild, r_moderate, r_high])
    r_s = np.zeros((m, W), dtype=np.int64)
    r_s[:, :half] = tier_level[tier][:, None]
    zeta_s = tier.astype(np.int64)

    # received messages, grouped by payload class
    lv = np.arange(msg_oldest.shape[1])

    def oldest_of(sel):
        if not sel.any():
            return np.full(m, -1)
        return msg_oldest[:, sel].max(axis=1)

    def newest_of(sel):
        if not sel.any():
            return np.full(m, _BIG)
        sub = np.where(msg_newest[:, sel] < 0, _BIG, msg_newest[:, sel])
        return sub.min(axis=1)

    top = lv == r_max
    high = (lv >= r_high) & (lv < r_max)
    moderate = (lv >= r_moderate) & (lv < r_high)
    mild_c = (lv >= r_mild) & (lv < r_moderate)

    top_old = oldest_of(top)
    high_old = oldest_of(high)
    mod_old = oldest_of(moderate)
    has_top = top_old >= 0
    has_high = high_old >= 0
    has_mod = mod_old >= 0

    msg_level = np.where(has_top, r_moderate,
                         np.where(has_high | has_mod, r_mild, 0))
    extent = np.where(has_top, top_old,
                      np.where(has_high, high_old,
                               np.where(has_mod, mod_old, -1)))
    zeta_m = np.where(has_top, 2, np.where(has_high | has_mod, 1, 0))
    r_m = np.where(offs[None, :] <= np.minimum(extent, W - 1)[:, None],
                   msg_level[:, None], 0)

    # recovery: without recent evidence, reset the recent half instead
    # of merging (the high class includes the top level so a fresh
    # confirmed-contact notification always blocks the reset)
    blocked = ((S_class[:, :half] > 0).any(axis=1)
               | has_pos
               | (newest_of(top | high) <= horizon_high)
               | (newest_of(moderate) <= horizon_moderate)
               | (newest_of(mild_c) <= horizon_mild))
    recovered = ~blocked
    r_rec = r_prev.copy()
    r_rec[:, :half] = 0

    merged = np.maximum(np.maximum(r_t, r_s), np.maximum(r_m, r_prev))
    zeta = np.maximum(np.maximum(zeta_t, zeta_s), zeta_m)

    # negative test overwrite; a positive anywhere takes priority and
    # suppresses it entirely
    neg_gate = has_neg & ~has_pos
    neg_off = np.where(T == -1, offs[None, :], _BIG).min(axis=1)
    zero = (neg_gate[:, None]
            & (np.abs(offs[None, :] - neg_off[:, None])
               <= negative_window // 2))
    merged = np.where(zero, 0, merged)
    zeta = np.where(neg_gate & (merged[:, 0] == 0), 0, zeta)

    risk = np.where(recovered[:, None], r_rec, merged)
    zeta = np.where(recovered, 0, zeta)
    return risk.astype(np.int16), zeta.astype(np.int8)


def heuristic_compute_risk(T, S, M, X=None, r_prev=None, *, dct_cfg=None):
    """Single-agent risk recomputation in spec-level terms.

    T: length-W sequence over {+1, 0, -1}, offset 0 = today.
    S: length-W sequence of iterables of reported symptom names.
    M: iterable of (payload_level, receipt_offset) pairs for stored
        messages.
    X: unused alias (negative tests already live in T).
    r_prev: length-W previous risk history (defaults to zeros).

    Returns (risk_history ndarray[W], zeta int).
    """
    cfg = dct_cfg if dct_cfg is not None else DctConfig()
    T = np.asarray(T, dtype=np.int64)
    W = len(T)
    high_set = set(cfg.symptom_tiers_high)
    moderate_set = set(cfg.symptom_tiers_moderate)
    s_class = np.zeros((1, W), dtype=np.int8)
    for off, names in enumerate(S if S is not None else []):
        c = 0
        for nm in names or ():
            if nm in high_set:
                c = max(c, 3)
            elif nm in moderate_set:
                c = max(c, 2)
            else:
                c = max(c, 1)
        s_class[0, off] = c
    oldest = np.full((1, cfg.risk_levels), -1, dtype=np.int64)
    newest = np.full((1, cfg.risk_levels), -1, dtype=np.int64)
    for payload, receipt_off in M or []:
        payload = int(payload)
        receipt_off = int(receipt_off)
        oldest[0, payload] = max(oldest[0, payload], receipt_off)
        newest[0, payload] = (receipt_off if newest[0, payload] < 0
                              else min(newest[0, payload], receipt_off))
    if r_prev is None:
        r_prev = np.zeros(W, dtype=np.int64)
    risk, zeta = heuristic_risk_update(
        T.reshape(1, -1), s_class, oldest, newest,
        np.asarray(r_prev).reshape(1, -1),
        r_mild=cfg.r_mild, r_moderate=cfg.r_moderate, r_high=cfg.r_high,
        levels=cfg.risk_levels,
        horizon_high=cfg.recovery_horizon_high,
        horizon_moderate=cfg.recovery_horizon_moderate,
        horizon_mild=cfg.recovery_horizon_mild,
        negative_window=cfg.negative_test_window)
    return risk[0], int(zeta[0])


def bct_compute(received_levels, *, own_positive=False, baseline_level=1,
                levels=16, window=14, second_order=False, marker_level=14):
    """Single-agent binary-tracing outcome in spec-level terms.

    received_levels: payload levels of messages received this window.
    Returns (risk_history ndarray[W], zeta int): quarantine on any
    confirmed-positive notification (or, with second_order, on a one-hop
    rebroadcast marker), baseline otherwise.
    """
    r_max = levels - 1
    hist = np.full(window, r_max if own_positive else 0, dtype=np.int16)
    alerted = own_positive or any(int(l) == r_max for l in received_levels)
    if second_order and not alerted:
        alerted = any(int(l) == marker_level for l in received_levels)
    zeta = 3 if alerted else baseline_level
    return hist, zeta


class NoTracingPolicy:
    """Baseline: no app machinery, everyone at the baseline level."""

    name = "none"
    uses_messages = False

    def __init__(self, pop):
        self.n = pop.n
        self.current_risk = np.zeros(pop.n, dtype=np.int16)
        self._rec = np.zeros(pop.n, dtype=np.int8)

    def new_day(self, day, symptom_matrix=None):
        pass

    def process_round(self, day, rnd, dirty, delivered):
        pass

    def recommendation(self, day):
        return self._rec

    def pop_new_alerts(self):
        return np.empty(0, dtype=np.int64)


class BinaryTracingPolicy:
    """Quarantine-on-notification tracing.

    A confirmed positive rewrites the agent's whole transmitted window to
    the top level, so stored contacts get update messages; delivery of a
    top-level payload triggers a quarantine recommendation for one
    window. With second_order=True, notified agents additionally
    rebroadcast once at a dedicated marker level whose recipients also
    quarantine but propagate nothing further.
    """

    uses_messages = True

    def __init__(self, pop, cfg, health, msgs, rng=None, second_order=False):
        self.name = "bct2" if second_order else "bct1"
        self.second_order = second_order
        self.pop = pop
        self.cfg = cfg
        self.health = health
        self.msgs = msgs
        n = pop.n
        self.W = cfg.tracing_days
        self.r_max = cfg.risk_levels - 1
        self.marker = cfg.second_order_level
        self.users = np.nonzero(pop.has_app)[0]
        self.positive_until = np.full(n, NO_DAY, dtype=np.int64)
        self.marked_until = np.full(n, NO_DAY, dtype=np.int64)
        self.rec_until = np.full(n, NO_DAY, dtype=np.int64)
        self.risk_hist = np.zeros((n, self.W), dtype=np.int16)
        self.current_risk = np.zeros(n, dtype=np.int16)
        self._new_alerts = []

    def new_day(self, day, symptom_matrix=None):
        self._rebuild(day)

    def _rebuild(self, day):
        col = np.zeros(self.pop.n, dtype=np.int16)
        if self.second_order:
            col[day < self.marked_until] = self.marker
        col[day < self.positive_until] = self.r_max
        self.risk_hist[:] = col[:, None]
        self.current_risk = col

    def process_round(self, day, rnd, dirty, delivered):
        if rnd == 0:
            pos_today = self.users[
                self.health.last_positive_report[self.users] == day]
            if len(pos_today):
                self.positive_until[pos_today] = day + self.W
        for kind, rec, lvl, enc_days in delivered:
            alert = rec[lvl == self.r_max]
            if len(alert):
                fresh = alert[self.rec_until[alert] <= day]
                self.rec_until[alert] = np.maximum(self.rec_until[alert],
                                                   day + self.W)
                if len(fresh):
                    self._new_alerts.append(fresh)
                if self.second_order:
                    mark = alert[day >= self.positive_until[alert]]
                    self.marked_until[mark] = np.maximum(
                        self.marked_until[mark], day + self.W)
            if self.second_order:
                second = rec[lvl == self.marker]
                if len(second):
                    fresh = second[self.rec_until[second] <= day]
                    self.rec_until[second] = np.maximum(
                        self.rec_until[second], day + self.W)
                    if len(fresh):
                        self._new_alerts.append(fresh)
        self._rebuild(day)
        self.msgs.emit_updates_for(self.risk_hist, self.users)

    def recommendation(self, day):
        rec = np.zeros(self.pop.n, dtype=np.int8)
        rec[day < self.rec_until] = 3
        return rec

    def pop_new_alerts(self):
        if not self._new_alerts:
            return np.empty(0, dtype=np.int64)
        out = np.unique(np.concatenate(self._new_alerts))
        self._new_alerts = []
        return out


class HeuristicPolicy:
    """Quantized risk-history tracing with rule-based recomputation."""

    name = "heuristic"
    uses_messages = True

    def __init__(self, pop, cfg, health, msgs, rng):
        self.pop = pop
        self.cfg = cfg
        self.health = health
        self.msgs = msgs
        self.rng = rng
        n = pop.n
        self.W = cfg.tracing_days
        self.users = np.nonzero(pop.has_app)[0]
        self.tiers = symptom_tier_table(cfg.symptom_tiers_high,
                                        cfg.symptom_tiers_moderate)
        self.risk_hist = np.zeros((n, self.W), dtype=np.int16)
        self.current_risk = np.zeros(n, dtype=np.int16)
        self.zeta = np.zeros(n, dtype=np.int8)
        self.S_class = np.zeros((n, self.W), dtype=np.int8)
        self._new_alerts = []

    def new_day(self, day, symptom_matrix=None):
        self.S_class[:, 1:] = self.S_class[:, :-1]
        self.S_class[:, 0] = 0
        self.risk_hist[:, 1:] = self.risk_hist[:, :-1]
        self.risk_hist[:, 0] = 0
        users = self.users
        if symptom_matrix is None or len(users) == 0:
            return
        has = symptom_matrix[users]
        tier = np.where(has, self.tiers[None, :], 0).max(axis=1).astype(
            np.int8)
        # daily reporting noise: missed reports and spurious extras
        drop = self.rng.random(len(users)) < self.cfg.symptom_report_dropout
        tier[drop] = 0
        spur = ((tier == 0)
                & (self.rng.random(len(users))
                   < self.cfg.symptom_report_dropin))
        if spur.any():
            picks = self.rng.integers(0, len(self.tiers), int(spur.sum()))
            tier[spur] = self.tiers[picks]
        self.S_class[users, 0] = tier

    def process_round(self, day, rnd, dirty, delivered):
        if rnd == 0:
            agents = self.users
        else:
            agents = dirty[self.pop.has_app[dirty]] if len(dirty) else dirty
        if len(agents) == 0:
            return
        oldest, newest = self.msgs.message_receipt_extrema(day, agents)
        cfg = self.cfg
        risk, zeta = heuristic_risk_update(
            self._test_window(day, agents), self.S_class[agents],
            oldest, newest, self.risk_hist[agents],
            r_mild=cfg.r_mild, r_moderate=cfg.r_moderate, r_high=cfg.r_high,
            levels=cfg.risk_levels,
            horizon_high=cfg.recovery_horizon_high,
            horizon_moderate=cfg.recovery_horizon_moderate,
            horizon_mild=cfg.recovery_horizon_mild,
            negative_window=cfg.negative_test_window)
        old_zeta = self.zeta[agents]
        self.risk_hist[agents] = risk
        self.zeta[agents] = zeta
        self.current_risk[agents] = risk[:, 0]
        newly = agents[(zeta >= 2) & (old_zeta < 2)]
        if len(newly):
            self._new_alerts.append(newly)
        self.msgs.emit_updates_for(self.risk_hist, agents)

    def _test_window(self, day, agents):
        T = np.zeros((len(agents), self.W), dtype=np.int8)
        h = self.health
        dp = day - h.last_positive_report[agents]
        keep = (dp >= 0) & (dp < min(self.W, h.cfg.positive_retention_days))
        T[np.nonzero(keep)[0], dp[keep]] = 1
        dn = day - h.last_negative_report[agents]
        keep_n = (dn >= 0) & (dn < min(self.W, h.cfg.negative_retention_days))
        rows = np.nonzero(keep_n)[0]
        free = T[rows, dn[keep_n]] == 0
        T[rows[free], dn[keep_n][free]] = -1
        return T

    def recommendation(self, day):
        return self.zeta

    def pop_new_alerts(self):
        if not self._new_alerts:
            return np.empty(0, dtype=np.int64)
        out = np.unique(np.concatenate(self._new_alerts))
        self._new_alerts = []
        return out


def make_policy(name, pop, dct_cfg, health, msgs, rng):
    """Instantiate the policy selected by config."""
    if name == "none":
        return NoTracingPolicy(pop)
    if name == "bct1":
        return BinaryTracingPolicy(pop, dct_cfg, health, msgs, rng,
                                   second_order=False)
    if name == "bct2":
        return BinaryTracingPolicy(pop, dct_cfg, health, msgs, rng,
                                   second_order=True)
    if name == "heuristic":
        return HeuristicPolicy(pop, dct_cfg, health, msgs, rng)
    raise ConfigError(f"unknown tracing method {name!r}")
