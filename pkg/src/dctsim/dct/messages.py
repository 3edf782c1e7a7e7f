"""Encounter/update messages, inboxes, and batched delivery.

Messages live on a quantized risk lattice of L levels (default 16).  An
encounter message carries the sender's current risk level and the
encounter day; an update message re-files a previously sent message under
a new level.  Each recipient's inbox is a dense (day x level) count grid:
a nonzero cell is a cluster in the (day, risk) sense, so cluster
bookkeeping (split on update, multiset conservation) falls out of count
arithmetic.

Delivery is batched: queued messages go out in up to four rounds per day;
whatever is still queued after the last round carries to the next day's
first round.
"""

from dataclasses import dataclass, field

import numpy as np

NOT_SENT = -1
NO_RECEIPT = -1


def perceived_distance(true_distance, noise_i, noise_j, u):
    """Distance as estimated from bluetooth attenuation.

    u is a uniform draw in [0,1) (pass an array for vectorized use). The
    offset scale grows quadratically with true distance: with worst-case
    noise 1 the error is bounded by 0.5 m at 1 m and 2 m at 2 m; with
    zero noise the estimate is exact.
    """
    offset = (np.asarray(true_distance) ** 2
              * 0.5 * (np.asarray(noise_i) + np.asarray(noise_j))
              * (np.asarray(u) - 0.5))
    return np.maximum(true_distance + offset, 0.0)


@dataclass(frozen=True)
class EncounterMessage:
    sender: int
    recipient: int
    risk: int
    encounter_day: int


@dataclass(frozen=True)
class UpdateMessage:
    sender: int
    recipient: int
    new_risk: int
    encounter_day: int
    old_risk: int


def capture_encounter(enc, has_app, bt_noise, risk_today, day, rng,
                      max_distance=2.0, min_minutes=15.0,
                      true_distance=None):
    """One encounter -> the two EncounterMessages it produces, or None.

    Exchange happens only if both endpoints run the app, the perceived
    distance is below max_distance, and the duration strictly exceeds
    min_minutes.
    """
    i, j = enc.i, enc.j
    if not (has_app[i] and has_app[j]):
        return None
    if not enc.minutes > min_minutes:
        return None
    d = true_distance if true_distance is not None \
        else float(rng.uniform(0.1, max_distance))
    perceived = float(perceived_distance(d, bt_noise[i], bt_noise[j],
                                         float(rng.random())))
    if not perceived < max_distance:
        return None
    return (EncounterMessage(int(i), int(j), int(risk_today[i]), day),
            EncounterMessage(int(j), int(i), int(risk_today[j]), day))


def capture_encounters(enc, has_app, bt_noise, risk_today, day, rng,
                       max_distance=2.0, min_minutes=15.0):
    """Vectorized capture: returns (senders, recipients, risks) arrays
    with one row per message (each captured encounter yields two)."""
    both = has_app[enc.i] & has_app[enc.j] & (enc.minutes > min_minutes)
    idx = np.flatnonzero(both)
    if len(idx) == 0:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0, dtype=np.int8)
    i = enc.i[idx]
    j = enc.j[idx]
    true_d = rng.uniform(0.1, max_distance, size=len(idx))
    perceived = perceived_distance(true_d, bt_noise[i], bt_noise[j],
                                   rng.random(len(idx)))
    ok = perceived < max_distance
    i, j = i[ok], j[ok]
    senders = np.concatenate([i, j])
    recipients = np.concatenate([j, i])
    risks = risk_today[senders].astype(np.int8)
    return senders, recipients, risks


@dataclass
class Cluster:
    """A (risk, day) bucket of encounter messages."""

    risk: int
    day: int
    count: int


def cluster_inbox(existing, new_msgs, updates):
    """Re-cluster an inbox: fold in new encounter messages, then apply
    updates, splitting clusters when an update covers only part of one.

    existing: list of Cluster; new_msgs: iterable of (risk, day);
    updates: iterable of (new_risk, day, old_risk, count).
    Updates that match no stored messages are dropped. The message
    multiset size is preserved (len in == len out).
    """
    grid = {}
    for c in existing:
        grid[(c.risk, c.day)] = grid.get((c.risk, c.day), 0) + c.count
    for risk, day in new_msgs:
        grid[(risk, day)] = grid.get((risk, day), 0) + 1
    for new_risk, day, old_risk, count in updates:
        have = grid.get((old_risk, day), 0)
        moved = min(have, count)
        if moved == 0:
            continue  # stale update: nothing stored to re-file
        if have - moved == 0:
            del grid[(old_risk, day)]
        else:
            grid[(old_risk, day)] = have - moved
        grid[(new_risk, day)] = grid.get((new_risk, day), 0) + moved
    return [Cluster(risk=r, day=d, count=c)
            for (r, d), c in sorted(grid.items()) if c > 0]


class MessageState:
    """Inboxes, send logs, and the batched delivery queue for all agents.

    inbox_counts[agent, offset, level]: number of stored messages whose
    encounter day is `offset` days ago with payload `level`. Each nonzero
    cell is one cluster. receipt_min/max track the earliest/latest
    absolute receipt day per cell (cells merge receipts; removing part of
    a cell leaves bounds untouched, a deliberate approximation).
    """

    def __init__(self, n, window=14, levels=16):
        self.n = n
        self.window = window
        self.levels = levels
        self.day = 0
        self.inbox_counts = np.zeros((n, window, levels), dtype=np.int32)
        self.receipt_min = np.full((n, window, levels), NO_RECEIPT,
                                   dtype=np.int32)
        self.receipt_max = np.full((n, window, levels), NO_RECEIPT,
                                   dtype=np.int32)
        # what each agent last transmitted per encounter-day offset
        self.sent_risk = np.full((n, window), NOT_SENT, dtype=np.int16)
        # per absolute day: (senders, recipients) sorted by sender
        self.sent_log = {}
        self._queue = []   # batches accepted but not yet delivered
        self.messages_sent = 0
        self.updates_sent = 0

    # --- day bookkeeping --------------------------------------------------

    def new_day(self, day):
        """Shift encounter-day axes one step and expire the oldest day."""
        shift = day - self.day
        for _ in range(min(shift, self.window)):
            self.inbox_counts[:, 1:] = self.inbox_counts[:, :-1]
            self.inbox_counts[:, 0] = 0
            self.receipt_min[:, 1:] = self.receipt_min[:, :-1]
            self.receipt_min[:, 0] = NO_RECEIPT
            self.receipt_max[:, 1:] = self.receipt_max[:, :-1]
            self.receipt_max[:, 0] = NO_RECEIPT
            self.sent_risk[:, 1:] = self.sent_risk[:, :-1]
            self.sent_risk[:, 0] = NOT_SENT
        self.day = day
        for d in [d for d in self.sent_log if day - d >= self.window]:
            del self.sent_log[d]

    # --- queuing -----------------------------------------------------------

    def queue_encounter_messages(self, senders, recipients, risks, enc_day):
        if len(senders) == 0:
            return
        self._queue.append(("enc", np.asarray(senders), np.asarray(recipients),
                            np.asarray(risks, dtype=np.int16),
                            np.full(len(senders), enc_day, dtype=np.int64)))
        # log what was sent for future updates
        order = np.argsort(senders, kind="stable")
        s = np.asarray(senders)[order]
        r = np.asarray(recipients)[order]
        prev = self.sent_log.get(enc_day)
        if prev is not None:
            s = np.concatenate([prev[0], s])
            r = np.concatenate([prev[1], r])
            order = np.argsort(s, kind="stable")
            s, r = s[order], r[order]
        self.sent_log[enc_day] = (s, r)
        offset = self.day - enc_day
        if 0 <= offset < self.window:
            self.sent_risk[np.asarray(senders), offset] = \
                np.asarray(risks, dtype=np.int16)
        self.messages_sent += len(senders)

    def queue_updates(self, senders, recipients, new_risks, enc_days,
                      old_risks):
        if len(senders) == 0:
            return
        self._queue.append(("upd", np.asarray(senders),
                            np.asarray(recipients),
                            np.asarray(new_risks, dtype=np.int16),
                            np.asarray(enc_days, dtype=np.int64),
                            np.asarray(old_risks, dtype=np.int16)))
        self.updates_sent += len(senders)

    def recipients_of(self, sender, enc_day):
        """Who received this agent's messages for a given encounter day."""
        log = self.sent_log.get(enc_day)
        if log is None:
            return np.empty(0, dtype=np.int64)
        s, r = log
        lo = np.searchsorted(s, sender, side="left")
        hi = np.searchsorted(s, sender, side="right")
        return r[lo:hi]

    def pending_count(self):
        return sum(len(item[1]) for item in self._queue)

    # --- delivery -----------------------------------------------------------

    def deliver_round(self, day):
        """Deliver everything queued so far into inboxes.

        Messages queued while a round is being processed (update emission
        during risk recomputation) go out in the next round; whatever is
        still queued after the day's last round carries over to tomorrow.

        Returns (dirty, delivered) where dirty is the array of recipients
        whose inbox changed and delivered is a list of (kind, recipients,
        levels, enc_days) tuples for event-driven policies.
        """
        batch, self._queue = self._queue, []
        dirty = []
        delivered = []
        for item in batch:
            kind = item[0]
            if kind == "enc":
                _, senders, recipients, risks, enc_days = item
                offsets = day - enc_days
                keep = (offsets >= 0) & (offsets < self.window)
                rec, off, lvl = (recipients[keep], offsets[keep],
                                 risks[keep].astype(np.int64))
                np.add.at(self.inbox_counts, (rec, off, lvl), 1)
                self._touch_receipt(rec, off, lvl, day)
                dirty.append(rec)
                delivered.append(("enc", rec, lvl, enc_days[keep]))
            else:
                _, senders, recipients, new_risks, enc_days, old_risks = item
                offsets = day - enc_days
                keep = (offsets >= 0) & (offsets < self.window)
                rec, off, new_l, old_l = self._apply_moves(
                    recipients[keep], offsets[keep],
                    old_risks[keep].astype(np.int64),
                    new_risks[keep].astype(np.int64), day)
                dirty.append(rec)
                delivered.append(("upd", rec, new_l, day - off))
        dirty = np.unique(np.concatenate(dirty)) if dirty else \
            np.empty(0, dtype=np.int64)
        return dirty, delivered

    def _apply_moves(self, rec, off, old_l, new_l, day):
        """Move stored messages between levels, one per update, never
        exceeding what a source cell holds (stale updates are dropped)."""
        if len(rec) == 0:
            return rec, off, new_l, old_l
        # aggregate identical moves, then allocate per source cell so
        # that concurrent updates cannot drive a count negative
        key = (((rec * self.window + off) * self.levels + old_l)
               * self.levels + new_l)
        uniq, req = np.unique(key, return_counts=True)
        u_new = uniq % self.levels
        rest = uniq // self.levels
        u_old = rest % self.levels
        rest //= self.levels
        u_off = rest % self.window
        u_rec = rest // self.window
        src = (u_rec * self.window + u_off) * self.levels + u_old
        order = np.argsort(src, kind="stable")
        src, u_rec, u_off, u_old, u_new, req = (
            src[order], u_rec[order], u_off[order], u_old[order],
            u_new[order], req[order])
        starts = np.r_[True, src[1:] != src[:-1]]
        excl = np.cumsum(req) - req
        excl -= np.repeat(excl[starts], np.diff(np.r_[
            np.nonzero(starts)[0], len(src)]))
        have = self.inbox_counts[u_rec, u_off, u_old]
        moved = np.clip(np.minimum(req, have - excl), 0, None)
        ok = moved > 0
        u_rec, u_off, u_old, u_new, moved = (
            u_rec[ok], u_off[ok], u_old[ok], u_new[ok], moved[ok])
        np.add.at(self.inbox_counts, (u_rec, u_off, u_old),
                  -moved.astype(np.int32))
        emptied = self.inbox_counts[u_rec, u_off, u_old] == 0
        self.receipt_min[u_rec[emptied], u_off[emptied],
                         u_old[emptied]] = NO_RECEIPT
        self.receipt_max[u_rec[emptied], u_off[emptied],
                         u_old[emptied]] = NO_RECEIPT
        np.add.at(self.inbox_counts, (u_rec, u_off, u_new),
                  moved.astype(np.int32))
        self._touch_receipt(u_rec, u_off, u_new, day)
        return u_rec, u_off, u_new, u_old

    def _touch_receipt(self, rec, off, lvl, day):
        cur_min = self.receipt_min[rec, off, lvl]
        cur_max = self.receipt_max[rec, off, lvl]
        self.receipt_min[rec, off, lvl] = np.where(
            cur_min == NO_RECEIPT, day, np.minimum(cur_min, day))
        self.receipt_max[rec, off, lvl] = np.where(
            cur_max == NO_RECEIPT, day, np.maximum(cur_max, day))

    # --- views for policies ---------------------------------------------------

    def message_receipt_extrema(self, day, agents=None):
        """Per (agent, level): oldest and newest receipt offsets.

        Returns (oldest, newest), each [n, levels] (or [len(agents),
        levels] for a subset), in days-before-today; -1 where no message
        of that level is stored.
        """
        counts = (self.inbox_counts if agents is None
                  else self.inbox_counts[agents])
        rmin = (self.receipt_min if agents is None
                else self.receipt_min[agents])
        rmax = (self.receipt_max if agents is None
                else self.receipt_max[agents])
        has = counts > 0
        rmin = np.where(has, rmin, np.iinfo(np.int32).max)
        rmax = np.where(has, rmax, np.iinfo(np.int32).min)
        earliest = rmin.min(axis=1)
        latest = rmax.max(axis=1)
        oldest = np.where(earliest == np.iinfo(np.int32).max, -1,
                          day - earliest)
        newest = np.where(latest == np.iinfo(np.int32).min, -1,
                          day - latest)
        return oldest.astype(np.int64), newest.astype(np.int64)

    def clusters_of(self, agent):
        """Cluster view of one agent's inbox (for tests/inspection)."""
        out = []
        cells = np.argwhere(self.inbox_counts[agent] > 0)
        for off, lvl in cells:
            out.append(Cluster(risk=int(lvl), day=self.day - int(off),
                               count=int(self.inbox_counts[agent, off, lvl])))
        return out

    def emit_updates_for(self, risk_hist, users):
        """Queue updates for senders whose current history differs from
        what they previously transmitted (only where something was sent,
        and only with an actual level change).

        risk_hist is the full [n, window] risk-level history.
        """
        sub = self.sent_risk[users]
        hist = risk_hist[users]
        changed = (sub != NOT_SENT) & (sub != hist)
        rows, offs = np.nonzero(changed)
        for k in range(len(rows)):
            sender = int(users[rows[k]])
            off = int(offs[k])
            enc_day = self.day - off
            new_r = int(hist[rows[k], off])
            old_r = int(sub[rows[k], off])
            self.sent_risk[sender, off] = new_r
            recipients = self.recipients_of(sender, enc_day)
            if len(recipients) == 0:
                continue
            self.queue_updates(
                np.full(len(recipients), sender, dtype=np.int64),
                recipients,
                np.full(len(recipients), new_r, dtype=np.int16),
                np.full(len(recipients), enc_day, dtype=np.int64),
                np.full(len(recipients), old_r, dtype=np.int16))
