"""Fading-state ensembles, transmitter side information and expectations.

Every bound in this package is an expectation over a finite, weighted set of
channel states.  Continuous fading laws are handled by drawing an empirical
ensemble with a fixed seed; once drawn, all downstream numbers are exact
with respect to that ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "ChannelState",
    "StateEnsemble",
    "CsitMap",
    "Budget",
    "RNG_ALGORITHM",
    "make_discrete_ensemble",
    "sample_rayleigh_ensemble",
    "rayleigh_inverse_cdf",
    "csit_from_quantizer",
    "csit_from_labels",
    "csit_determines_inr",
    "expect",
]

WEIGHT_TOL = 1e-12

# Recorded verbatim in run metadata so sampled goldens can be audited.
RNG_ALGORITHM = "numpy.random.PCG64 raw 64-bit stream; u = (x >> 11) * 2**-53"

QUANTIZER_FEATURES = ("none", "inr-magnitude", "full-state", "custom-binning")


@dataclass(frozen=True)
class ChannelState:
    """Gain magnitudes |S11|, |S12|, |S21|, |S22| at one support point.

    ``g12`` couples transmitter 2 into receiver 1 and ``g21`` couples
    transmitter 1 into receiver 2.
    """

    g11: float
    g12: float
    g21: float
    g22: float

    def __post_init__(self):
        for name in ("g11", "g12", "g21", "g22"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    def as_tuple(self):
        return (self.g11, self.g12, self.g21, self.g22)


@dataclass(frozen=True)
class Budget:
    p1: float
    p2: float

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    """Finite weighted support of the channel-state law.

    ``gains`` is an ``(n, 4)`` read-only array with columns g11, g12, g21, g22
    and ``weights`` sums to one.  Build instances through
    :func:`make_discrete_ensemble` or :func:`sample_rayleigh_ensemble`.
    """

    gains: np.ndarray
    weights: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "exact-enumeration"})

    def __len__(self):
        return self.gains.shape[0]

    @property
    def states(self):
        return [ChannelState(*row) for row in self.gains.tolist()]

    @property
    def g11(self):
        return self.gains[:, 0]

    @property
    def g12(self):
        return self.gains[:, 1]

    @property
    def g21(self):
        return self.gains[:, 2]

    @property
    def g22(self):
        return self.gains[:, 3]

    def to_json(self):
        return {
            "states": self.gains.tolist(),
            "weights": self.weights.tolist(),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_json(cls, obj):
        states = [ChannelState(*row) for row in obj["states"]]
        ens = make_discrete_ensemble(states, obj["weights"])
        if "provenance" in obj:
            object.__setattr__(ens, "provenance", dict(obj["provenance"]))
        return ens


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def make_discrete_ensemble(states: Sequence[ChannelState], weights: Sequence[float]) -> StateEnsemble:
    """Build an ensemble from explicit support points and probabilities.

    Weights are never renormalised: a sum that misses one by more than
    1e-12 is rejected so scenario files stay auditable.
    """
    states = list(states)
    weights = [float(w) for w in weights]
    if not states:
        raise ValueError("ensemble needs at least one state")
    if len(states) != len(weights):
        raise ValueError(f"{len(states)} states but {len(weights)} weights")
    for i, w in enumerate(weights):
        if not math.isfinite(w) or w <= 0:
            raise ValueError(f"weight {i} must be positive and finite, got {w!r}")
    total = math.fsum(weights)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1 (tolerance {WEIGHT_TOL})")
    rows = []
    for s in states:
        if not isinstance(s, ChannelState):
            s = ChannelState(*s)
        rows.append(s.as_tuple())
    return StateEnsemble(_frozen(rows), _frozen(weights), {"kind": "exact-enumeration"})


def rayleigh_inverse_cdf(u, sigma):
    """Map uniforms in [0, 1) to Rayleigh(sigma) magnitudes."""
    u = np.asarray(u, dtype=float)
    return sigma * np.sqrt(-2.0 * np.log1p(-u))


def _uniform_stream(seed, count):
    bits = np.random.PCG64(seed).random_raw(count)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def sample_rayleigh_ensemble(sigmas, n: int, seed: int) -> StateEnsemble:
    """Draw ``n`` i.i.d. states with independent Rayleigh gains.

    Parameters
    ----------
    sigmas : 4 floats
        Rayleigh scale for g11, g12, g21, g22 (density x/s^2 exp(-x^2/2s^2)).
    n : int
        Number of support points, each with weight 1/n.
    seed : int
        Seed of the PCG64 bit generator.  The raw stream is consumed row by
        row, four values per state in the order g11, g12, g21, g22.
    """
    sigmas = [float(s) for s in sigmas]
    if len(sigmas) != 4:
        raise ValueError("need exactly four Rayleigh scales")
    for s in sigmas:
        if not math.isfinite(s) or s < 0:
            raise ValueError(f"Rayleigh scale must be finite and >= 0, got {s!r}")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    u = _uniform_stream(int(seed), 4 * n).reshape(n, 4)
    gains = rayleigh_inverse_cdf(u, np.asarray(sigmas))
    weights = np.full(n, 1.0 / n)
    prov = {
        "kind": "sampled",
        "sampler": "rayleigh",
        "sigmas": sigmas,
        "n": n,
        "seed": int(seed),
        "rng": RNG_ALGORITHM,
    }
    return StateEnsemble(_frozen(gains), _frozen(weights), prov)


@dataclass(frozen=True, eq=False)
class CsitMap:
    """Side information E_i = xi_i(S) of one transmitter.

    ``labels[k]`` is the symbol (an int in ``range(size)``) that the
    transmitter observes at support point ``k``.  Symbols are numbered in
    order of first appearance.
    """

    labels: np.ndarray
    names: tuple
    feature: str = "custom"

    @property
    def size(self):
        return len(self.names)

    @property
    def alphabet(self):
        return tuple(range(self.size))

    def symbol_probabilities(self, ensemble: StateEnsemble) -> np.ndarray:
        self.check_bound(ensemble)
        return np.bincount(self.labels, weights=ensemble.weights, minlength=self.size)

    def check_bound(self, ensemble: StateEnsemble):
        if len(self.labels) != len(ensemble):
            raise ValueError(
                f"CSIT map has {len(self.labels)} labels but ensemble has {len(ensemble)} states"
            )

    def refine(self, other: "CsitMap") -> "CsitMap":
        """Joint map (self, other); refines both."""
        if len(other.labels) != len(self.labels):
            raise ValueError("cannot combine CSIT maps of different lengths")
        pairs = list(zip(self.labels.tolist(), other.labels.tolist()))
        return _relabel(pairs, lambda p: f"({self.names[p[0]]},{other.names[p[1]]})", "joint")


def _relabel(keys, namer, feature):
    index = {}
    labels = []
    names = []
    for k in keys:
        if k not in index:
            index[k] = len(names)
            names.append(namer(k))
        labels.append(index[k])
    return CsitMap(_frozen_int(labels), tuple(names), feature)


def _frozen_int(a):
    a = np.ascontiguousarray(a, dtype=np.intp)
    a.setflags(write=False)
    return a


def _inr_column(ensemble, which):
    if which in (1, "1", "transmitter-1", "tx1"):
        return ensemble.g21
    if which in (2, "2", "transmitter-2", "tx2"):
        return ensemble.g12
    raise ValueError(f"unknown transmitter {which!r}")


def csit_from_quantizer(ensemble: StateEnsemble, which, feature: str = "none", edges=None) -> CsitMap:
    """Deterministic CSIT map for transmitter ``which`` (1 or 2).

    ``inr-magnitude`` and ``custom-binning`` look at the cross gain that the
    transmitter creates at the other receiver: g21 for transmitter 1 and g12
    for transmitter 2.
    """
    inr = _inr_column(ensemble, which)
    if feature == "none":
        return _relabel([0] * len(ensemble), lambda k: "none", feature)
    if feature == "inr-magnitude":
        return _relabel(inr.tolist(), lambda v: f"{v!r}", feature)
    if feature == "full-state":
        return _relabel([tuple(r) for r in ensemble.gains.tolist()], lambda r: repr(r), feature)
    if feature == "custom-binning":
        if edges is None:
            raise ValueError("custom-binning needs bin edges")
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        bins = np.searchsorted(edges, inr, side="right").tolist()
        return _relabel(bins, lambda b: f"bin{b}", feature)
    raise ValueError(f"unknown CSIT feature {feature!r}; expected one of {QUANTIZER_FEATURES}")


def csit_from_labels(ensemble: StateEnsemble, labels, names=None) -> CsitMap:
    """Wrap arbitrary per-state labels, checking they are a function of the state."""
    labels = list(labels)
    if len(labels) != len(ensemble):
        raise ValueError("one label per support point required")
    seen = {}
    for row, lab in zip(map(tuple, ensemble.gains.tolist()), labels):
        if seen.setdefault(row, lab) != lab:
            raise ValueError(f"labels are not a function of the state: {row} has two labels")
    return _relabel(labels, (lambda k: str(k)) if names is None else names, "custom")


def csit_determines_inr(csit: CsitMap, ensemble: StateEnsemble, link) -> bool:
    """True iff every CSIT symbol class has a single value of the cross gain.

    ``link`` names the cross gain: ``"cross-gain-to-rx2"`` (g21, the INR
    seen by transmitter 1) or ``"cross-gain-to-rx1"`` (g12).  Transmitter
    numbers 1/2 are accepted as aliases.
    """
    csit.check_bound(ensemble)
    if link in ("cross-gain-to-rx2", 1, "1", "transmitter-1", "tx1"):
        col = ensemble.g21
    elif link in ("cross-gain-to-rx1", 2, "2", "transmitter-2", "tx2"):
        col = ensemble.g12
    else:
        raise ValueError(f"unknown link {link!r}")
    ref = np.full(csit.size, np.nan)
    for lab, v in zip(csit.labels.tolist(), col.tolist()):
        if math.isnan(ref[lab]):
            ref[lab] = v
        elif ref[lab] != v:
            return False
    return True


def expect(ensemble: StateEnsemble, f: Union[Callable, np.ndarray, Sequence[float]]) -> float:
    """Weighted sum of ``f`` over the support.

    ``f`` is either a callable taking a :class:`ChannelState` or an array of
    per-support-point values (trailing axis = support).  Batched arrays
    return one expectation per leading index.
    """
    if callable(f):
        values = np.array([float(f(s)) for s in ensemble.states])
    else:
        values = np.asarray(f, dtype=float)
    if values.shape[-1:] != (len(ensemble),):
        raise ValueError(f"expected {len(ensemble)} values on the trailing axis, got shape {values.shape}")
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise FloatingPointError(f"non-finite value {values[tuple(idx)]!r} at support point {int(idx[-1])}")
    out = np.sum(values * ensemble.weights, axis=-1)
    return float(out) if out.ndim == 0 else out
