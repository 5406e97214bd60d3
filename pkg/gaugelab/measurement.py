"""
Detector arrays in momentum space: bin probabilities, Born-rule sampling
with a counter-based random stream, collapse onto a bin, and the
detection-force bookkeeping Delta P(n) = P - hbar k(n).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import DimensionMismatch, PartitionGap, ZeroBin
from .noether import noether_momentum
from .packet import dispersion, normalize, unit_directions

SUPPORT_TOL = 1e-15
BLOCK_SIZE = 4096
CHI2_QUANTILE = 0.999
DISCREPANCY_SIGMAS = 4.0
ROUNDOFF_TOL = 1e-12


@dataclass(frozen=True)
class SolidAngleTiling:
    """
    n_polar bands uniform in cos(theta) times n_azimuth equal wedges, all of
    equal solid angle. Each bin is half-open with the lower edge inclusive;
    cos(theta) = 1 belongs to the top band. The origin node takes the +z
    direction, so it lands in the top band, wedge 0.
    """
    n_polar: int
    n_azimuth: int

    def __post_init__(self):
        if self.n_polar < 1 or self.n_azimuth < 1:
            raise ValueError("a tiling needs at least one band and one wedge")

    @property
    def count(self):
        return self.n_polar * self.n_azimuth

    def assign(self, grid):
        if grid.dim != 3:
            raise DimensionMismatch("solid-angle tiles need a 3D grid")
        cos_theta = unit_directions(grid)[2]
        band = np.floor((cos_theta + 1.0) * 0.5 * self.n_polar).astype(int)
        band = np.clip(band, 0, self.n_polar - 1)
        azimuth = np.mod(np.arctan2(grid.k_vectors[1], grid.k_vectors[0]), 2.0 * np.pi)
        wedge = np.floor(azimuth * self.n_azimuth / (2.0 * np.pi)).astype(int)
        wedge = np.clip(wedge, 0, self.n_azimuth - 1)
        return band * self.n_azimuth + wedge

    def describe(self):
        return {"type": "solid-angle", "n_polar": self.n_polar, "n_azimuth": self.n_azimuth}


@dataclass(frozen=True)
class KIntervals:
    """Contiguous 1D intervals [edges[i], edges[i+1]); edges may be infinite."""
    edges: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("interval edges must be strictly increasing, at least two of them")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, grid, count):
        """`count` equal intervals covering every node of the grid."""
        lo, hi = grid.k_extent[0]
        half = 0.5 * grid.spacing[0]
        return cls(tuple(np.linspace(lo - half, hi + half, count + 1)))

    @property
    def count(self):
        return len(self.edges) - 1

    def assign(self, grid):
        if grid.dim != 1:
            raise DimensionMismatch("k intervals need a 1D grid")
        k = grid.k_vectors[0]
        labels = np.searchsorted(np.asarray(self.edges), k, side="right") - 1
        labels[(labels < 0) | (labels >= self.count)] = -1
        return labels

    def describe(self):
        return {"type": "k-intervals", "edges": list(self.edges)}


@dataclass(frozen=True, eq=False)
class BinTable:
    """
    Per-bin probability, Noether momentum P(n) and registered momentum
    hbar k(n) of one packet on one detector array.
    """
    labels: np.ndarray
    probabilities: np.ndarray
    momentum: np.ndarray
    wavevectors: np.ndarray
    registered: np.ndarray

    @property
    def count(self):
        return len(self.probabilities)


def tabulate_bins(packet, array):
    grid = packet.grid
    labels = array.assign(grid)
    supported = np.abs(packet.alpha) > SUPPORT_TOL
    gaps = supported & (labels < 0)
    if np.any(gaps):
        raise PartitionGap(f"{int(np.count_nonzero(gaps))} supported nodes lie outside every bin")

    count = array.count
    inside = labels >= 0
    idx = labels[inside]
    p = packet.probability[inside]
    probabilities = np.bincount(idx, weights=p, minlength=count)
    hbar = packet.constants.hbar
    components = [packet.k0] + list(grid.k_vectors)
    momentum = np.stack([hbar * np.bincount(idx, weights=p * k[inside], minlength=count)
                         for k in components], axis=1)

    safe = np.where(probabilities > 0, probabilities, 1.0)
    if grid.dim == 3:
        directions = unit_directions(grid)
        radius = np.sqrt(grid.k_norm_sq)[inside]
        mean_radius = np.bincount(idx, weights=p * radius, minlength=count) / safe
        mean_dir = np.stack([np.bincount(idx, weights=p * d[inside], minlength=count)
                             for d in directions], axis=1)
        length = np.linalg.norm(mean_dir, axis=1)
        mean_dir = mean_dir / np.where(length > 0, length, 1.0)[:, None]
        wavevectors = mean_radius[:, None] * mean_dir
    else:
        wavevectors = (momentum[:, 1:] / hbar) / safe[:, None]
    wavevectors[probabilities == 0] = 0.0
    k0 = dispersion(wavevectors.T, packet.constants) / packet.constants.c
    registered = hbar * np.column_stack([k0, wavevectors])
    return BinTable(labels, probabilities, momentum, wavevectors, registered)


def bin_probabilities(packet, array):
    """p(n) = sum of |alpha|^2 dk^d over the nodes of bin n."""
    return tabulate_bins(packet, array).probabilities


def bin_momentum(packet, array, n):
    """P^mu(n) = hbar sum |alpha|^2 k^mu dk^d over bin n, as [P0, ..., Pd]."""
    return tabulate_bins(packet, array).momentum[n]


def collapse(packet, array, n):
    """Project onto bin n and renormalize."""
    table = tabulate_bins(packet, array)
    if table.probabilities[n] <= 0:
        raise ZeroBin(f"bin {n} has zero detection probability")
    return normalize(np.where(table.labels == n, packet.alpha, 0.0), packet.grid, packet.constants)


def _cumulative(probs):
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or np.any(probs < 0) or probs.sum() <= 0:
        raise ValueError("probabilities must be a nonempty nonnegative vector with positive sum")
    cdf = np.cumsum(probs)
    return cdf / cdf[-1]


def _block_uniforms(seed, block, block_size):
    """The uniforms of one block: Philox keyed by the seed, counter at the block index."""
    generator = np.random.Generator(np.random.Philox(key=int(seed), counter=int(block) << 64))
    return generator.random(block_size)


def sample_detections(probs, trials, seed, start=0, block_size=BLOCK_SIZE):
    """Bins detected in trials start .. start + trials - 1, each a function of (seed, trial)."""
    cdf = _cumulative(probs)
    indices = np.arange(start, start + trials)
    uniforms = np.empty(trials)
    for block in np.unique(indices // block_size):
        chosen = indices // block_size == block
        uniforms[chosen] = _block_uniforms(seed, block, block_size)[indices[chosen] % block_size]
    return np.minimum(np.searchsorted(cdf, uniforms, side="right"), len(cdf) - 1)


def sample_detection(probs, trial_index, seed, block_size=BLOCK_SIZE):
    return int(sample_detections(probs, 1, seed, trial_index, block_size)[0])


@dataclass
class TrialLedger:
    """
    Detected bins of a set of trials plus the running sums of the registered
    momentum and of Delta P = P - hbar k(n). Merging ledgers of disjoint
    trial ranges is associative and order independent.
    """
    seed: int
    bins: int
    trial_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    detected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    counts: np.ndarray = None
    delta_sum: np.ndarray = None
    delta_sq_sum: np.ndarray = None
    registered_sum: np.ndarray = None
    registered_sq_sum: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.bins, dtype=int)

    @classmethod
    def from_trials(cls, seed, table, total_momentum, trial_indices, detected):
        registered = table.registered[detected]
        delta = total_momentum[None, :] - registered
        return cls(seed, table.count, np.asarray(trial_indices), np.asarray(detected),
                   np.bincount(detected, minlength=table.count),
                   delta.sum(axis=0), (delta ** 2).sum(axis=0),
                   registered.sum(axis=0), (registered ** 2).sum(axis=0))

    @property
    def trials(self):
        return int(self.trial_indices.size)

    def merge(self, other):
        if other.seed != self.seed or other.bins != self.bins:
            raise ValueError("ledgers of different seeds or arrays cannot be merged")
        if other.trials == 0:
            return self
        if self.trials == 0:
            return other
        order = np.argsort(np.concatenate([self.trial_indices, other.trial_indices]), kind="stable")
        return TrialLedger(
            self.seed, self.bins,
            np.concatenate([self.trial_indices, other.trial_indices])[order],
            np.concatenate([self.detected, other.detected])[order],
            self.counts + other.counts,
            self.delta_sum + other.delta_sum,
            self.delta_sq_sum + other.delta_sq_sum,
            self.registered_sum + other.registered_sum,
            self.registered_sq_sum + other.registered_sq_sum,
        )

    @staticmethod
    def _mean_and_error(total, total_sq, n):
        mean = total / n
        if n < 2:
            return mean, np.full_like(mean, np.inf)
        variance = np.maximum(total_sq / n - mean ** 2, 0.0) * n / (n - 1)
        return mean, np.sqrt(variance / n)

    def mean_delta(self):
        """Monte Carlo mean of Delta P^mu and its standard error."""
        return self._mean_and_error(self.delta_sum, self.delta_sq_sum, self.trials)

    def mean_registered(self):
        return self._mean_and_error(self.registered_sum, self.registered_sq_sum, self.trials)

    def to_columns(self):
        return {"trial": list(self.trial_indices), "bin": list(self.detected)}


def run_trials(packet, array, trials, seed, block_size=BLOCK_SIZE, pbar=None):
    """Sample `trials` detections block by block and merge the block ledgers."""
    if trials < 1:
        raise ValueError("at least one trial is required")
    table = tabulate_bins(packet, array)
    total = noether_momentum(packet)
    ledger = TrialLedger(seed, table.count)
    starts = range(0, trials, block_size)
    if pbar is not None:
        starts = pbar(starts, desc="Detection trials")
    for start in starts:
        size = min(block_size, trials - start)
        detected = sample_detections(table.probabilities, size, seed, start, block_size)
        block = TrialLedger.from_trials(seed, table, total, np.arange(start, start + size), detected)
        ledger = ledger.merge(block)
    return ledger, table


def _floats(values):
    return [float(v) for v in np.ravel(values)]


def _fluctuating(table):
    """Components whose registered value differs between the bins that can fire."""
    live = table.registered[table.probabilities > 0]
    scale = np.maximum(1.0, np.max(np.abs(live), axis=0))
    return np.ptp(live, axis=0) > ROUNDOFF_TOL * scale


def _agrees(mean, reference, error, fluctuating):
    """Within DISCREPANCY_SIGMAS standard errors; components that cannot fluctuate must match to roundoff."""
    floor = ROUNDOFF_TOL * np.maximum(1.0, np.abs(reference))
    bound = np.where(fluctuating, DISCREPANCY_SIGMAS * error + floor, floor)
    return np.abs(mean - reference) <= bound


def detection_force_trials(packet, array, trials, seed, pbar=None):
    """
    Average momentum balance Delta P = P - hbar k(n) over sampled detections,
    next to its exact weighted mean sum p(n) Delta P(n).
    Components on which every bin registers the same value carry no
    sampling noise and are compared to roundoff instead.
    """
    ledger, table = run_trials(packet, array, trials, seed, pbar=pbar)
    total = noether_momentum(packet)
    mean, error = ledger.mean_delta()
    exact = total - table.probabilities @ table.registered
    fluctuating = _fluctuating(table)
    summary = {
        "trials": ledger.trials,
        "seed": seed,
        "counts": [int(c) for c in ledger.counts],
        "probabilities": _floats(table.probabilities),
        "mean_delta": _floats(mean),
        "stderr": _floats(error),
        "exact_mean_delta": _floats(exact),
        "fluctuating": [bool(f) for f in fluctuating],
        "within_bound": bool(np.all(_agrees(mean, exact, error, fluctuating))),
    }
    return ledger, summary


def expectation_vs_noether(packet, array, trials, seed, pbar=None):
    """
    Monte Carlo mean of the registered momentum hbar k(n) against the Noether P.

    within_bound compares the mean with the exact expectation sum p(n) hbar k(n);
    matches_noether compares it with P on the components that fluctuate. The
    deterministic offset of the others is the bin bias.
    """
    ledger, table = run_trials(packet, array, trials, seed, pbar=pbar)
    total = noether_momentum(packet)
    mean, error = ledger.mean_registered()
    exact = table.probabilities @ table.registered
    difference = mean - total
    fluctuating = _fluctuating(table)
    return {
        "trials": ledger.trials,
        "noether": _floats(total),
        "monte_carlo": _floats(mean),
        "stderr": _floats(error),
        "difference": _floats(difference),
        "exact_expectation": _floats(exact),
        "bin_bias": _floats(total - exact),
        "fluctuating": [bool(f) for f in fluctuating],
        "within_bound": bool(np.all(_agrees(mean, exact, error, fluctuating))),
        "matches_noether": bool(np.all(_agrees(mean, total, error, fluctuating)[fluctuating])),
    }


def _goodness_of_fit(probs, counts):
    trials = counts.sum()
    expected = trials * probs
    live = expected > 0
    statistic = float(np.sum((counts[live] - expected[live]) ** 2 / expected[live]))
    dof = int(np.count_nonzero(live)) - 1
    threshold = float(chi2.ppf(CHI2_QUANTILE, dof)) if dof > 0 else float("inf")
    spread = np.sqrt(np.where(live, trials * probs * (1.0 - probs), 1.0))
    z = np.where(live & (spread > 0), (counts - expected) / np.where(spread > 0, spread, 1.0), 0.0)
    return {"chi2": statistic, "dof": dof, "threshold": threshold,
            "frequencies": _floats(counts / trials), "z_scores": _floats(z),
            "passed": statistic <= threshold}


def born_rule_audit(probs, trials, seed, pbar=None):
    """
    Chi-squared test of sampled frequencies against probs at the 99.9%
    quantile. A single exceedance is flagged and retried once with seed + 1;
    the audit fails only when the retry also exceeds.
    """
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    attempts = []
    for attempt_seed in (seed, seed + 1):
        counts = np.zeros(len(probs), dtype=int)
        starts = range(0, trials, BLOCK_SIZE)
        if pbar is not None:
            starts = pbar(starts, desc=f"Born-rule trials (seed {attempt_seed})")
        for start in starts:
            size = min(BLOCK_SIZE, trials - start)
            counts += np.bincount(sample_detections(probs, size, attempt_seed, start),
                                  minlength=len(probs))
        result = _goodness_of_fit(probs, counts)
        result["seed"] = attempt_seed
        attempts.append(result)
        if result["passed"]:
            break
    if attempts[0]["passed"]:
        status = "pass"
    elif attempts[-1]["passed"]:
        status = "flagged"
    else:
        status = "fail"
    return {"status": status, "trials": trials, "probabilities": _floats(probs), "attempts": attempts}
