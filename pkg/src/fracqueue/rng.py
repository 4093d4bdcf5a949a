"""Seedable random variates: stable, Mittag-Leffler and inverse-stable draws.

Every draw goes through an :class:`RngStream`, a Philox counter-based
generator keyed by ``(seed, stream_id)``. Replicate ``r`` of an experiment
owns its own stream (see ``fracqueue.experiments.stream_id``), so runs are
reproducible regardless of how replicates are scheduled.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

_U64 = 2 ** 64


class RngStream:
    """Independent substream of random numbers.

    Parameters
    ----------
    seed : int
        64-bit master seed shared by all streams of one run.
    stream_id : int
        64-bit substream selector. Streams with equal ``(seed, stream_id)``
        produce identical sequences; distinct ids are independent.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        for name, v in (("seed", seed), ("stream_id", stream_id)):
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < _U64:
                raise ParameterError(f"{name} must be an integer in [0, 2**64), got {v!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def exponential(self, size=None):
        """Unit-rate exponential draws."""
        return self.generator.exponential(1.0, size)


def _check_alpha(alpha):
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")


def sample_stable(stream: RngStream, alpha: float, size=None):
    """One-sided stable draws with Laplace transform ``exp(-xi**alpha)``.

    Uses Kanter's representation

        T = sin(alpha U) / sin(U)^(1/alpha) * (sin((1-alpha) U) / W)^((1-alpha)/alpha)

    with ``U ~ Uniform(0, pi)`` and ``W ~ Exp(1)``. ``alpha = 1`` is the
    degenerate law at 1 and consumes no random numbers.

    Returns a float when ``size`` is None, otherwise an array.
    """
    _check_alpha(alpha)
    if alpha == 1.0:
        return 1.0 if size is None else np.ones(size)
    u = stream.uniform(0.0, np.pi, size)
    w = stream.exponential(size)
    t = (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
         * (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha))
    return float(t) if size is None else t


def sample_ml_sojourn(stream: RngStream, alpha: float, rate, size=None):
    """Mittag-Leffler sojourn times with survival ``E_alpha(-rate t^alpha)``.

    Realised as ``(E / rate)^(1/alpha) * T`` with ``E ~ Exp(1)`` and ``T``
    from :func:`sample_stable`. ``rate`` may be an array, in which case it
    broadcasts against ``size`` (and defines the shape when ``size`` is None).
    """
    _check_alpha(alpha)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(rate > 0)):
        raise ParameterError("rate must be positive")
    if size is None and rate.ndim:
        size = rate.shape
    e = stream.exponential(size)
    t = sample_stable(stream, alpha, size)
    s = (e / rate) ** (1.0 / alpha) * t
    return float(s) if size is None else s


def sample_inverse_subordinator(stream: RngStream, alpha: float, t: float, size=None):
    """Draws from the one-dimensional law of the inverse stable subordinator at ``t``.

    By self-similarity ``E(t)`` has the law of ``(t / T)^alpha``.
    """
    _check_alpha(alpha)
    if t < 0:
        raise ParameterError("t must be non-negative")
    if alpha == 1.0 or t == 0.0:
        val = float(t)
        return val if size is None else np.full(size, val)
    tt = sample_stable(stream, alpha, size)
    return (t / tt) ** alpha
