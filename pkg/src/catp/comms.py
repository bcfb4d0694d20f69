"""Link metrics, transmission-power policies and per-trajectory link accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1
from scipy.stats import ncx2

from .motion.integrate import Trajectory
from .seeding import as_rng


def cnr(gain, sigma2):
    if not np.all(np.asarray(sigma2) > 0):
        raise ValueError("noise power must be > 0")
    return np.abs(gain) ** 2 / sigma2


def snr(cnr_value, tx_power):
    if np.any(np.asarray(tx_power) < 0):
        raise ValueError("transmit power must be >= 0")
    return np.asarray(tx_power) * cnr_value


def rss_dbm(gain, tx_power):
    """Received power in dBm for a transmit power in watts (unit antenna gains)."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(tx_power) * np.abs(gain) ** 2) + 30.0


def rssi(rss, step_db=1.0, floor_dbm=-100.0):
    """Quantised received-signal indicator: ``floor((rss - floor) / step)``, never below 0."""
    if not step_db > 0:
        raise ValueError("RSSI step must be > 0")
    rss = np.asarray(rss, dtype=float)
    idx = np.floor((np.where(np.isfinite(rss), rss, floor_dbm) - floor_dbm) / step_db)
    return np.maximum(idx, 0).astype(np.int64)


def tx_power_adaptive(gain, p_ref, p_max=math.inf):
    """Power that delivers ``p_ref`` at the receiver, or silence (outage) when that exceeds ``p_max``."""
    if not (p_ref > 0 and p_max > 0):
        raise ValueError("p_ref and p_max must be > 0")
    g2 = np.abs(np.asarray(gain)) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        required = np.where(g2 > 0, p_ref / np.where(g2 > 0, g2, 1.0), np.inf)
    outage = (required > p_max) | (g2 <= 0)
    return np.where(outage, 0.0, required), outage


@dataclass(frozen=True)
class RateCurve:
    """Bit rate as a function of SNR.

    ``shannon`` gives ``B log2(1 + snr)``. ``table`` is a step function: rate
    ``rates[i]`` once the SNR reaches ``thresholds_db[i]`` (and 0 below the
    first threshold).
    """

    kind: str = "shannon"
    bandwidth: float = 1.0
    thresholds_db: tuple = ()
    rates: tuple = ()

    def __post_init__(self):
        if self.kind == "shannon":
            if not self.bandwidth > 0:
                raise ValueError("RateCurve: bandwidth must be > 0")
        elif self.kind == "table":
            th, r = np.asarray(self.thresholds_db, float), np.asarray(self.rates, float)
            if len(th) == 0 or th.shape != r.shape:
                raise ValueError("RateCurve: table needs matching, non-empty thresholds and rates")
            if np.any(np.diff(th) <= 0) or np.any(np.diff(r) < 0) or np.any(r < 0):
                raise ValueError("RateCurve: thresholds must increase and rates must be non-decreasing and >= 0")
        else:
            raise ValueError(f"RateCurve: unknown kind {self.kind!r}")

    def __call__(self, snr_value):
        s = np.asarray(snr_value, dtype=float)
        if self.kind == "shannon":
            return self.bandwidth * np.log2(1.0 + s)
        with np.errstate(divide="ignore"):
            s_db = 10.0 * np.log10(s)
        idx = np.searchsorted(np.asarray(self.thresholds_db, float), s_db, side="right")
        return np.concatenate([[0.0], np.asarray(self.rates, float)])[idx]


@dataclass(frozen=True)
class TransmissionPolicy:
    kind: str = "constant"
    power: float = 1.0
    p_ref: float = 1.0
    p_max: float = math.inf

    def __post_init__(self):
        if self.kind not in ("constant", "adaptive"):
            raise ValueError(f"TransmissionPolicy: unknown kind {self.kind!r}")
        if self.kind == "constant" and not self.power > 0:
            raise ValueError("TransmissionPolicy: constant power must be > 0")
        if self.kind == "adaptive" and not (self.p_ref > 0 and self.p_max > 0):
            raise ValueError("TransmissionPolicy: p_ref and p_max must be > 0")

    def with_power(self, power: float) -> "TransmissionPolicy":
        return TransmissionPolicy(self.kind, power, self.p_ref, self.p_max)

    def apply(self, gain):
        if self.kind == "constant":
            shape = np.shape(gain)
            return np.full(shape, float(self.power)), np.zeros(shape, dtype=bool)
        return tx_power_adaptive(gain, self.p_ref, self.p_max)


@dataclass(frozen=True)
class LinkBudget:
    noise_power: float
    policy: TransmissionPolicy = TransmissionPolicy()
    rate_curve: RateCurve = RateCurve()
    rssi_step_db: float = 1.0
    rssi_floor_dbm: float = -100.0
    receiver_power: float = 0.0

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ValueError("LinkBudget: noise_power must be > 0")
        if not self.rssi_step_db > 0:
            raise ValueError("LinkBudget: rssi_step_db must be > 0")
        if self.receiver_power < 0:
            raise ValueError("LinkBudget: receiver_power must be >= 0")

    def with_power(self, power: float) -> "LinkBudget":
        return LinkBudget(
            self.noise_power, self.policy.with_power(power), self.rate_curve,
            self.rssi_step_db, self.rssi_floor_dbm, self.receiver_power,
        )


def ergodic_capacity_rayleigh(bandwidth, mean_snr):
    """``B E[log2(1 + g)]`` for exponentially distributed SNR with mean ``mean_snr``."""
    g = np.asarray(mean_snr, dtype=float)
    safe = np.where(g > 0, g, 1.0)
    # e^{1/g} E1(1/g) overflows as g -> 0; the scaled form stays finite
    val = _exp_e1(1.0 / safe) / math.log(2.0)
    return bandwidth * np.where(g > 0, val, 0.0)


def _exp_e1(x):
    """``e^x E1(x)``, switching to a continued fraction for large ``x``."""
    x = np.asarray(x, dtype=float)
    small = x < 50
    out = np.empty_like(x)
    xs = x[small]
    out[small] = np.exp(xs) * exp1(xs)
    xl = x[~small]
    # continued fraction 1/(x+1-1/(x+3-4/(x+5-...))), truncated after 30 levels
    acc = np.zeros_like(xl)
    for k in range(30, 0, -1):
        acc = k * k / (xl + 2 * k + 1 - acc)
    out[~small] = 1.0 / (xl + 1 - acc)
    return out


def ergodic_capacity_mc(bandwidth, snr_samples):
    """Monte-Carlo capacity estimate: returns ``(mean, standard error)``."""
    r = bandwidth * np.log2(1.0 + np.asarray(snr_samples, dtype=float))
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(r.size))


def ergodic_capacity(bandwidth, distribution: str, mean_snr=None, samples=None):
    """Capacity for ``distribution`` in {deterministic, rayleigh, samples}."""
    if distribution == "deterministic":
        return bandwidth * math.log2(1.0 + mean_snr)
    if distribution == "rayleigh":
        return float(ergodic_capacity_rayleigh(bandwidth, mean_snr))
    if distribution == "samples":
        return ergodic_capacity_mc(bandwidth, samples)[0]
    raise ValueError(f"unknown SNR distribution {distribution!r}")


def fading_power_tail(y, fading="rayleigh", rician_k=0.0):
    """``Pr(|h|^2 >= y)`` for unit-scatter fading (Rayleigh, Rician with LoS sqrt(K), or none)."""
    y = np.asarray(y, dtype=float)
    if fading == "none":
        return (y <= 1.0).astype(float)
    if fading == "rayleigh" or rician_k == 0:
        return np.exp(-np.maximum(y, 0.0))
    if fading == "rician":
        # 2|h|^2 is noncentral chi-square with 2 degrees of freedom and noncentrality 2K
        return ncx2.sf(2.0 * np.maximum(y, 0.0), 2, 2.0 * rician_k)
    raise ValueError(f"unknown fading kind {fading!r}")


def sample_fading(shape, fading, rician_k, rng):
    rng = as_rng(rng)
    if fading == "none":
        return np.ones(shape, dtype=complex)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return z + math.sqrt(rician_k)


@dataclass
class LinkRecord:
    """Per-sample link accounting along a trajectory (numpy columns)."""

    t: np.ndarray
    gain: np.ndarray
    cnr: np.ndarray
    tx_power: np.ndarray
    snr: np.ndarray
    rss_dbm: np.ndarray
    rssi: np.ndarray
    rate: np.ndarray
    outage: np.ndarray
    energy: np.ndarray = field(default=None)  # cumulative transmit energy at each sample

    @property
    def gain_db(self):
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.gain))

    @property
    def snr_db(self):
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.snr)


def peer_positions(peer, times):
    """Peer position at each time: a fixed point or a callable ``q(t)``."""
    if callable(peer):
        return np.stack([np.asarray(peer(t), dtype=float) for t in np.asarray(times)])
    q = np.asarray(peer, dtype=float)
    return np.broadcast_to(q, np.shape(times) + q.shape[-1:])


def _positions(traj: Trajectory, position_indices):
    return traj.states[..., list(position_indices)]


def _match_dim(p, q):
    """Pad the lower-dimensional of p, q with zeros so both have the same width."""
    n = max(p.shape[-1], q.shape[-1])

    def pad(a):
        if a.shape[-1] == n:
            return a
        return np.concatenate([a, np.zeros(a.shape[:-1] + (n - a.shape[-1],))], axis=-1)

    return pad(p), pad(q)


def link_positions(traj: Trajectory, peer, position_indices=(0, 1)):
    p = _positions(traj, position_indices)
    q = peer_positions(peer, traj.times)
    return _match_dim(p, np.broadcast_to(q, p.shape[:-1] + q.shape[-1:]))


def link_records(traj: Trajectory, channel, budget: LinkBudget, peer, position_indices=(0, 1)) -> LinkRecord:
    """Evaluate one channel realisation along the trajectory samples."""
    p, q = link_positions(traj, peer, position_indices)
    t = np.broadcast_to(traj.times, p.shape[:-1])
    H = channel.gain(p, q, t)
    c = cnr(H, budget.noise_power)
    power, outage = budget.policy.apply(H)
    s = np.where(outage, 0.0, snr(c, power))
    rate = np.where(outage, 0.0, budget.rate_curve(s))
    rss = rss_dbm(H, power)
    return LinkRecord(
        t=np.asarray(t),
        gain=H,
        cnr=c,
        tx_power=power,
        snr=s,
        rss_dbm=rss,
        rssi=rssi(rss, budget.rssi_step_db, budget.rssi_floor_dbm),
        rate=rate,
        outage=outage,
        energy=_cumulative_energy(power, traj.dt, budget),
    )


def _cumulative_energy(power, dt, budget: LinkBudget):
    n = power.shape[-1] - 1
    if budget.policy.kind == "constant":
        return (budget.policy.power + budget.receiver_power) * (dt * np.arange(n + 1))
    inc = 0.5 * (power[..., 1:] + power[..., :-1]) * dt
    cum = np.concatenate([np.zeros(power.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)
    return cum + budget.receiver_power * dt * np.arange(n + 1)


def comm_energy(traj: Trajectory, channel, budget: LinkBudget, peer, position_indices=(0, 1)):
    """Transmit (plus optional receiver) energy over the trajectory; returns ``(joules, LinkRecord)``.

    Constant power gives exactly ``P T``; adaptive power is integrated by the
    trapezoid rule, with outage samples transmitting nothing.
    """
    if budget.policy.kind == "constant":
        energy = (budget.policy.power + budget.receiver_power) * traj.duration
        if channel is None:
            return energy, None
        rec = link_records(traj, channel, budget, peer, position_indices)
        return energy, rec
    rec = link_records(traj, channel, budget, peer, position_indices)
    return rec.energy[..., -1], rec


def _snr_scale(channel, budget: LinkBudget, p, q):
    """SNR per unit ``|h|^2`` under constant power: ``P A^2 / sigma^2``."""
    return budget.policy.power * channel.large_scale_amplitude(p, q) ** 2 / budget.noise_power


def _crn_shape(mc_samples, amp):
    """Draw shape shared by every leading batch entry (common random numbers).

    Only the last (time) axis gets its own draws, so a candidate's estimate
    does not depend on which batch it was evaluated in.
    """
    amp = np.asarray(amp)
    if amp.ndim == 0:
        return (mc_samples,)
    return (mc_samples,) + (1,) * (amp.ndim - 1) + amp.shape[-1:]


def expected_rate(channel, budget: LinkBudget, p, q, mc_samples=1000, rng=None):
    """``E[R(SNR)]`` over fading at each position pair; returns ``(mean, per-sample MC variance)``.

    Closed form (zero variance) for constant power with a Shannon rate and no
    or Rayleigh fading; Monte Carlo otherwise.
    """
    kind, K = channel.fading_kind, channel.rician_k
    policy, rate = budget.policy, budget.rate_curve
    if policy.kind == "constant":
        scale = _snr_scale(channel, budget, p, q)
        if kind == "none":
            return rate(scale), np.zeros_like(scale)
        if kind == "rayleigh" and rate.kind == "shannon":
            return ergodic_capacity_rayleigh(rate.bandwidth, scale), np.zeros_like(scale)
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    amp = channel.large_scale_amplitude(p, q)
    h = sample_fading(_crn_shape(mc_samples, amp), kind, K, rng)
    H = amp * h
    power, outage = policy.apply(H)
    s = np.where(outage, 0.0, power * np.abs(H) ** 2 / budget.noise_power)
    r = np.where(outage, 0.0, rate(s))
    var = r.var(axis=0, ddof=1) if mc_samples > 1 else np.zeros(r.shape[1:])
    return r.mean(axis=0), var


def expected_bits(traj: Trajectory, channel, budget: LinkBudget, peer, mc_samples=1000, rng=None, position_indices=(0, 1)):
    """Expected number of bits delivered along the trajectory: ``(mean, standard error)``.

    The time integral uses the trapezoid rule over the trajectory samples.
    Monte-Carlo draws are independent between samples, so the standard error
    combines the per-sample variances with the trapezoid weights.
    """
    p, q = link_positions(traj, peer, position_indices)
    mean, var = expected_rate(channel, budget, p, q, mc_samples, rng)
    n = mean.shape[-1]
    w = np.full(n, traj.dt)
    w[0] = w[-1] = 0.5 * traj.dt
    bits = np.sum(w * mean, axis=-1)
    stderr = np.sqrt(np.sum(w**2 * var, axis=-1) / max(mc_samples, 1))
    return bits, stderr


def snr_success_probability(channel, budget: LinkBudget, p, q, gamma0):
    """``Pr(SNR >= gamma0)`` over fading at each position pair (closed form)."""
    if not gamma0 > 0:
        raise ValueError("gamma0 must be > 0")
    kind, K = channel.fading_kind, channel.rician_k
    amp2 = channel.large_scale_amplitude(p, q) ** 2
    policy = budget.policy
    if policy.kind == "constant":
        return fading_power_tail(gamma0 / (policy.power * amp2 / budget.noise_power), kind, K)
    # adaptive: SNR is p_ref / sigma^2 whenever the link is not in outage
    if policy.p_ref / budget.noise_power < gamma0:
        return np.zeros_like(amp2)
    return fading_power_tail(policy.p_ref / (policy.p_max * amp2), kind, K)


def snr_outage_probability(channel, budget: LinkBudget, p, q, gamma0, mc_samples=0, rng=None):
    """``Pr(SNR >= gamma0)``; with ``mc_samples > 0`` returns a Monte-Carlo ``(estimate, stderr)`` instead."""
    if mc_samples <= 0:
        return snr_success_probability(channel, budget, p, q, gamma0)
    amp = channel.large_scale_amplitude(p, q)
    h = sample_fading(_crn_shape(mc_samples, amp), channel.fading_kind, channel.rician_k, rng)
    H = amp * h
    power, outage = budget.policy.apply(H)
    hit = (~outage) & (power * np.abs(H) ** 2 / budget.noise_power >= gamma0)
    est = hit.mean(axis=0)
    return est, np.sqrt(est * (1 - est) / mc_samples)


def expected_tx_power(channel, budget: LinkBudget, p, q, mc_samples=1000, rng=None):
    """Mean transmit power over fading at each position pair: ``(mean, per-sample MC variance)``."""
    policy = budget.policy
    amp2 = channel.large_scale_amplitude(p, q) ** 2
    if policy.kind == "constant":
        return np.full(np.shape(amp2), float(policy.power)), np.zeros(np.shape(amp2))
    y = policy.p_ref / (policy.p_max * amp2)
    kind = channel.fading_kind
    if kind == "none":
        return np.where(amp2 * policy.p_max >= policy.p_ref, policy.p_ref / amp2, 0.0), np.zeros(np.shape(amp2))
    if kind == "rayleigh":
        # E[1/|h|^2 ; |h|^2 >= y] = E1(y) for exponential |h|^2
        with np.errstate(divide="ignore"):
            return policy.p_ref / amp2 * exp1(y), np.zeros(np.shape(amp2))
    amp = np.sqrt(amp2)
    h = sample_fading(_crn_shape(mc_samples, amp), kind, channel.rician_k, rng)
    power, _ = policy.apply(amp * h)
    var = power.var(axis=0, ddof=1) if mc_samples > 1 else np.zeros(power.shape[1:])
    return power.mean(axis=0), var


def expected_comm_energy(traj: Trajectory, channel, budget: LinkBudget, peer, mc_samples=1000, rng=None, position_indices=(0, 1)):
    """Expected transmit (plus receiver) energy along the trajectory: ``(mean, standard error)``."""
    if budget.policy.kind == "constant":
        e = (budget.policy.power + budget.receiver_power) * traj.duration
        return np.full(traj.states.shape[:-2], e), np.zeros(traj.states.shape[:-2])
    p, q = link_positions(traj, peer, position_indices)
    mean, var = expected_tx_power(channel, budget, p, q, mc_samples, rng)
    n = mean.shape[-1]
    w = np.full(n, traj.dt)
    w[0] = w[-1] = 0.5 * traj.dt
    energy = np.sum(w * mean, axis=-1) + budget.receiver_power * traj.duration
    return energy, np.sqrt(np.sum(w**2 * var, axis=-1) / max(mc_samples, 1))
