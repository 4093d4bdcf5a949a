"""Path simulation for the fractional linear birth-death process and M/M/1 queue.

Both processes jump to a neighbouring state with probabilities
``lambda / theta`` (up) and ``mu / theta`` (down), ``theta = lambda + mu``,
after a Mittag-Leffler sojourn. The linear process uses rate ``theta k`` in
state ``k`` and is absorbed at 0. The queue uses rate ``theta`` in every state
``k >= 1``; in state 0 only arrivals are possible, so the sojourn has rate
``lambda`` and ends in a forced birth.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import DataFormatError, ParameterError
from .rng import RngStream, sample_inverse_subordinator, sample_ml_sojourn

BIRTH = "birth"
DEATH = "death"
PATH_COLUMNS = ("event_index", "event_time", "event_type", "state_after")

_CHUNK = 4096


@dataclass(frozen=True)
class ModelParams:
    """Parameters shared by both processes.

    Attributes
    ----------
    alpha : float
        Fractional order in (0, 1]; 1 gives the classical Markov process.
    lam, mu : float
        Birth (arrival) and death (service) intensities.
    initial_state : int
        Starting population ``i`` (queue) or ``m`` (linear process).
    """

    alpha: float
    lam: float
    mu: float
    initial_state: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if int(self.initial_state) != self.initial_state or self.initial_state < 0:
            raise ParameterError(f"initial_state must be a non-negative integer, got {self.initial_state}")
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def theta(self) -> float:
        return self.lam + self.mu

    @property
    def p_birth(self) -> float:
        return self.lam / (self.lam + self.mu)


@dataclass(frozen=True)
class StopRule:
    """When to stop a path; the first condition met wins.

    ``count_zero_state=False`` makes ``max_events`` count only sojourns that
    start in a state ``k >= 1``, which is how the queue experiments collect
    ``n`` usable sojourns when state-0 sojourns are excluded from estimation.
    """

    max_events: Optional[int] = None
    time_horizon: Optional[float] = None
    target_state: Optional[int] = None
    count_zero_state: bool = True

    def __post_init__(self):
        if self.max_events is None and self.time_horizon is None and self.target_state is None:
            raise ParameterError("stop rule needs at least one of max_events, time_horizon, target_state")
        if self.max_events is not None and self.max_events < 0:
            raise ParameterError("max_events must be non-negative")
        if self.time_horizon is not None and not self.time_horizon >= 0:
            raise ParameterError("time_horizon must be non-negative")
        if self.target_state is not None and self.target_state < 0:
            raise ParameterError("target_state must be non-negative")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PathSample:
    """One trajectory stored column-wise.

    ``times[j]`` is the epoch of event ``j``, ``births[j]`` whether it was a
    birth and ``states[j]`` the state right after it. ``durations`` keeps the
    sojourns as drawn: a sojourn far shorter than the clock value is lost when
    differencing ``times``, so consecutive times may coincide in floating point
    even though every duration is positive.
    """

    params: ModelParams
    times: np.ndarray
    births: np.ndarray
    states: np.ndarray
    terminal_reason: str
    durations: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, float))
        object.__setattr__(self, "births", _frozen(self.births, bool))
        object.__setattr__(self, "states", _frozen(self.states, np.int64))
        if self.durations is None:
            d = np.diff(np.concatenate(([0.0], self.times)))
        else:
            d = self.durations
        object.__setattr__(self, "durations", _frozen(d, float))

    def __len__(self):
        return len(self.times)

    @property
    def events(self) -> list[tuple[float, str, int]]:
        return [(float(t), BIRTH if b else DEATH, int(s))
                for t, b, s in zip(self.times, self.births, self.states)]

    @property
    def states_before(self) -> np.ndarray:
        return np.concatenate(([self.params.initial_state], self.states[:-1])).astype(np.int64)

    def state_at(self, t: float) -> int:
        """State occupied at clock time ``t`` (right-continuous)."""
        j = int(np.searchsorted(self.times, t, side="right"))
        return self.params.initial_state if j == 0 else int(self.states[j - 1])


@dataclass(frozen=True)
class SojournData:
    """Sojourn records: state left, time spent there, and how it was left."""

    states: np.ndarray
    durations: np.ndarray
    births: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        states = _frozen(self.states, np.int64)
        durations = _frozen(self.durations, float)
        births = _frozen(self.births, bool)
        if not (len(states) == len(durations) == len(births)):
            raise ParameterError("states, durations and births must have equal length")
        if np.any(states < 0):
            raise ParameterError("states must be non-negative")
        if np.any(~(durations > 0)) or np.any(~np.isfinite(durations)):
            raise ParameterError("durations must be positive and finite")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "births", births)

    def __len__(self):
        return len(self.durations)

    @property
    def n(self) -> int:
        return len(self.durations)

    @property
    def n_births(self) -> int:
        return int(np.count_nonzero(self.births))

    @property
    def n_deaths(self) -> int:
        return self.n - self.n_births

    @property
    def records(self) -> Iterator[tuple[int, float, str]]:
        for k, s, b in zip(self.states, self.durations, self.births):
            yield int(k), float(s), BIRTH if b else DEATH

    def without_state(self, k: int) -> "SojournData":
        keep = self.states != k
        return SojournData(self.states[keep], self.durations[keep], self.births[keep], dict(self.meta))


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------

def _truncate(stop: StopRule, states_before, states_after, times, counted_before):
    """Number of chunk events to keep and the stop reason (None if no rule fired)."""
    n = len(times)
    hits = []
    if stop.time_horizon is not None:
        over = np.flatnonzero(times > stop.time_horizon)
        if over.size:
            hits.append((int(over[0]), "horizon"))
    if stop.max_events is not None:
        if stop.count_zero_state:
            counted = counted_before + np.arange(1, n + 1)
        else:
            counted = counted_before + np.cumsum(states_before > 0)
        hit = np.flatnonzero(counted >= stop.max_events)
        if hit.size:
            hits.append((int(hit[0]) + 1, "max_events"))
    if stop.target_state is not None:
        hit = np.flatnonzero(states_after == stop.target_state)
        if hit.size:
            hits.append((int(hit[0]) + 1, "target_state"))
    if not hits:
        return n, None
    return min(hits, key=lambda h: h[0])


def _simulate(params: ModelParams, stream: RngStream, stop: StopRule, linear: bool) -> PathSample:
    p = params.p_birth
    state = params.initial_state
    clock = 0.0
    counted = 0
    out_t, out_b, out_s, out_d = [], [], [], []

    def done(reason):
        return PathSample(params,
                          np.concatenate(out_t) if out_t else np.empty(0),
                          np.concatenate(out_b) if out_b else np.empty(0, bool),
                          np.concatenate(out_s) if out_s else np.empty(0, np.int64),
                          reason,
                          np.concatenate(out_d) if out_d else np.empty(0))

    if stop.max_events == 0:
        return done("max_events")
    if stop.target_state is not None and state == stop.target_state:
        return done("target_state")
    if linear and state == 0:
        return done("extinction")

    chunk = 64
    while True:
        # chunk sizes do not depend on the stop rule, so paths drawn from
        # equal streams agree on their common prefix
        size = chunk
        chunk = min(2 * chunk, _CHUNK)
        u = stream.uniform(size=size)
        up = u < p
        if linear:
            steps = np.where(up, 1, -1)
            after = state + np.cumsum(steps)
            before = np.concatenate(([state], after[:-1]))
            zero = np.flatnonzero(after == 0)
            stop_ext = int(zero[0]) + 1 if zero.size else None
            if stop_ext is not None:
                after, before, up = after[:stop_ext], before[:stop_ext], up[:stop_ext]
            rates = params.theta * before
        else:
            # reflected walk: state 0 always moves up
            before = np.empty(size, np.int64)
            after = np.empty(size, np.int64)
            s = state
            upl = up.tolist()
            for j in range(size):
                before[j] = s
                if s == 0:
                    upl[j] = True
                    s = 1
                else:
                    s = s + 1 if upl[j] else s - 1
                after[j] = s
            up = np.array(upl, dtype=bool)
            stop_ext = None
            rates = np.where(before > 0, params.theta, params.lam)
        durations = sample_ml_sojourn(stream, params.alpha, rates)
        times = clock + np.cumsum(durations)
        cut, reason = _truncate(stop, before, after, times, counted)
        if reason is None and stop_ext is not None:
            reason = "extinction"
        out_t.append(times[:cut])
        out_b.append(up[:cut])
        out_s.append(after[:cut])
        out_d.append(durations[:cut])
        if reason is not None:
            return done(reason)
        if stop.count_zero_state:
            counted += cut
        else:
            counted += int(np.count_nonzero(before[:cut] > 0))
        clock = float(times[-1])
        state = int(after[-1])


def simulate_linear_bd(params: ModelParams, stream: RngStream, stop: StopRule) -> PathSample:
    """Fractional linear birth-death path started at ``params.initial_state``.

    In state ``k`` the sojourn is Mittag-Leffler with rate ``theta k``. The
    path ends at extinction or when ``stop`` fires.
    """
    return _simulate(params, stream, stop, linear=True)


def simulate_mm1(params: ModelParams, stream: RngStream, stop: StopRule) -> PathSample:
    """Fractional M/M/1 queue path; state 0 has rate ``lambda`` and a forced birth."""
    if stop.max_events is None and stop.time_horizon is None:
        # target state alone may never be reached for a transient queue
        raise ParameterError("queue simulation needs max_events or time_horizon")
    return _simulate(params, stream, stop, linear=False)


def simulate_mm1_subordinated(params: ModelParams, stream: RngStream, t: float, size=None):
    """Queue state at time ``t`` drawn by running the classical queue to ``E(t)``.

    ``E(t)`` is the inverse stable subordinator; the time-changed classical
    queue has the same one-dimensional law as the fractional queue. With
    ``size`` given, draws are vectorised across replicates.
    """
    if t < 0:
        raise ParameterError("t must be non-negative")
    n = 1 if size is None else int(size)
    tau = np.atleast_1d(sample_inverse_subordinator(stream, params.alpha, t, size=n))
    state = np.full(n, params.initial_state, dtype=np.int64)
    clock = np.zeros(n)
    active = np.flatnonzero(tau > 0)
    while active.size:
        s = state[active]
        rate = np.where(s > 0, params.theta, params.lam)
        clock[active] += stream.exponential(active.size) / rate
        alive = clock[active] <= tau[active]
        moving = active[alive]
        sm = state[moving]
        up = stream.uniform(size=moving.size) < params.p_birth
        state[moving] = np.where((sm == 0) | up, sm + 1, sm - 1)
        active = moving
    return int(state[0]) if size is None else state


def extract_sojourns(path: PathSample) -> SojournData:
    """Sojourn records of a path; the first duration is measured from time 0."""
    if len(path) == 0:
        return SojournData(np.empty(0, np.int64), np.empty(0), np.empty(0, bool))
    return SojournData(path.states_before, path.durations, path.births)


# ---------------------------------------------------------------------------
# CSV exchange
# ---------------------------------------------------------------------------

def path_to_csv(path: PathSample, fh=None) -> str:
    """Write the path as CSV (``event_index,event_time,event_type,state_after``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PATH_COLUMNS)
    for j, (t, typ, s) in enumerate(path.events):
        w.writerow((j, format(t, ".17g"), typ, s))
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def path_from_csv(fh, params: ModelParams, terminal_reason: str = "max_events") -> PathSample:
    """Read a path written by :func:`path_to_csv`."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != PATH_COLUMNS:
        raise DataFormatError(f"expected header {','.join(PATH_COLUMNS)}", line=1)
    times, births, states = [], [], []
    prev_state = params.initial_state
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise DataFormatError(f"expected 4 fields, got {len(row)}", line=lineno)
        try:
            t = float(row[1])
            s = int(row[3])
        except ValueError as exc:
            raise DataFormatError(str(exc), line=lineno) from None
        typ = row[2].strip()
        if typ not in (BIRTH, DEATH):
            raise DataFormatError(f"unknown event type {typ!r}", line=lineno)
        if s - prev_state != (1 if typ == BIRTH else -1):
            raise DataFormatError("state_after must move by one in the event direction", line=lineno)
        if times and t < times[-1]:
            raise DataFormatError("event times must be non-decreasing", line=lineno)
        times.append(t)
        births.append(typ == BIRTH)
        states.append(s)
        prev_state = s
    return PathSample(params, times, births, states, terminal_reason)
