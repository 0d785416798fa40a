"""Channel geometry, mean flows and initial plate data.

A channel holds ``n`` plates at rest heights ``h_1 < ... < h_n`` between a
bottom wall ``h_0`` and a top wall ``h_{n+1}``.  Gap ``i`` (``0 <= i <= n``)
lies between ``h_i`` and ``h_{i+1}`` and carries mean flow ``U_i``.
Every other module consumes :class:`ValidatedConfig` only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonMonotoneHeights, NonPositiveGap, WrongFlowCount

DEFAULT_AMPLITUDE = 0.1
DEFAULT_WIDTH = 2.0
DEFAULT_CENTER = 0.0

# boundary magnitude allowed for initial profiles, relative to the peak
DECAY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ChannelConfig:
    heights: tuple[float, ...]
    flows: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "heights", tuple(float(h) for h in self.heights))
        object.__setattr__(self, "flows", tuple(float(u) for u in self.flows))

    @property
    def n(self) -> int:
        return len(self.heights) - 2


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValidatedConfig:
    """Checked configuration with derived gap widths.

    Attributes
    ----------
    n : int
        Number of plates.
    heights : ndarray, shape (n+2,)
        Absolute heights, bottom wall first.
    flows : ndarray, shape (n+1,)
        Mean-flow speed in each gap.
    gaps : ndarray, shape (n+1,)
        ``gaps[i] = heights[i+1] - heights[i]``.
    width : float
        Channel width ``h_{n+1} - h_0``.
    """

    n: int
    heights: np.ndarray
    flows: np.ndarray
    gaps: np.ndarray = field(repr=False)
    width: float = field(repr=False)

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())

    @property
    def has_flow(self) -> bool:
        return bool(np.any(self.flows != 0.0))

    def to_config(self) -> ChannelConfig:
        return ChannelConfig(tuple(self.heights), tuple(self.flows))

    def to_dict(self) -> dict:
        return {"heights": [float(h) for h in self.heights], "flows": [float(u) for u in self.flows]}

    def with_flows(self, flows) -> "ValidatedConfig":
        return validate(ChannelConfig(tuple(self.heights), tuple(flows)))

    def scaled(self, factor: float) -> "ValidatedConfig":
        """Same flows, every height multiplied by ``factor``."""
        return validate(ChannelConfig(tuple(factor * self.heights), tuple(self.flows)))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def __hash__(self):
        return hash((self.heights.tobytes(), self.flows.tobytes()))

    def __eq__(self, other):
        if not isinstance(other, ValidatedConfig):
            return NotImplemented
        return np.array_equal(self.heights, other.heights) and np.array_equal(self.flows, other.flows)


def validate(config: ChannelConfig | ValidatedConfig) -> ValidatedConfig:
    """Check the channel invariants and cache the derived gap widths."""
    if isinstance(config, ValidatedConfig):
        config = config.to_config()
    heights = np.asarray(config.heights, dtype=float)
    flows = np.asarray(config.flows, dtype=float)
    if heights.ndim != 1 or heights.size < 3:
        raise ConfigError("need at least one plate: heights must hold n+2 >= 3 values")
    if not (np.all(np.isfinite(heights)) and np.all(np.isfinite(flows))):
        raise ConfigError("heights and flows must be finite")
    n = heights.size - 2
    if flows.shape != (n + 1,):
        raise WrongFlowCount(f"{n} plates need {n + 1} flows, got {flows.size}")
    gaps = np.diff(heights)
    if np.any(gaps < 0):
        raise NonMonotoneHeights(f"heights must increase: {heights.tolist()}")
    if np.any(gaps == 0):
        raise NonPositiveGap(f"zero-width gap in heights {heights.tolist()}")
    return ValidatedConfig(
        n=n,
        heights=_frozen(heights),
        flows=_frozen(flows),
        gaps=_frozen(gaps),
        width=float(heights[-1] - heights[0]),
    )


def make_config(gaps: Sequence[float], flows: Sequence[float], bottom: float = 0.0) -> ValidatedConfig:
    """Build a validated config from gap widths instead of absolute heights."""
    heights = bottom + np.concatenate([[0.0], np.cumsum(gaps)])
    return validate(ChannelConfig(tuple(heights), tuple(flows)))


def uniform_config(n: int, flows, gap: float = 1.0) -> ValidatedConfig:
    flows = np.broadcast_to(np.asarray(flows, dtype=float), (n + 1,))
    return make_config([gap] * (n + 1), flows)


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class GaussianBump:
    plate: int
    center: float = DEFAULT_CENTER
    width: float = DEFAULT_WIDTH
    amplitude: float = DEFAULT_AMPLITUDE
    velocity: bool = False

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-(((x - self.center) / self.width) ** 2))


@dataclass(frozen=True)
class InitialData:
    """Initial amplitude and velocity profiles for each plate.

    Profiles are either Gaussian bumps ``a * exp(-((x - c) / s)**2)`` or
    tabulated samples on the simulation grid (``tabulated`` maps a 1-based
    plate index to a pair ``(eta, eta_t)`` of arrays).
    """

    n: int
    bumps: tuple[GaussianBump, ...] = ()
    tabulated: dict | None = None

    def __post_init__(self):
        for b in self.bumps:
            if not 1 <= b.plate <= self.n:
                raise ConfigError(f"plate index {b.plate} outside 1..{self.n}")
            if b.width <= 0:
                raise ConfigError(f"Gaussian width must be positive, got {b.width}")

    def sample(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(eta, eta_t)``, each of shape ``(n, len(x))``."""
        x = np.asarray(x, dtype=float)
        eta = np.zeros((self.n, x.size))
        eta_t = np.zeros((self.n, x.size))
        for b in self.bumps:
            target = eta_t if b.velocity else eta
            target[b.plate - 1] += b(x)
        if self.tabulated:
            for plate, (amp, vel) in self.tabulated.items():
                eta[plate - 1] += np.asarray(amp, dtype=float)
                eta_t[plate - 1] += np.asarray(vel, dtype=float)
        check_decay(eta, eta_t)
        return eta, eta_t

    def metadata(self) -> list[dict]:
        out = [
            {
                "plate": b.plate,
                "center": b.center,
                "width": b.width,
                "amplitude": b.amplitude,
                "field": "velocity" if b.velocity else "amplitude",
            }
            for b in self.bumps
        ]
        if self.tabulated:
            out.append({"tabulated_plates": sorted(self.tabulated)})
        return out


def check_decay(*profiles: np.ndarray) -> None:
    stacked = np.concatenate([np.atleast_2d(p) for p in profiles])
    peak = np.abs(stacked).max(initial=0.0)
    if peak == 0.0:
        return
    edge = max(np.abs(stacked[:, 0]).max(), np.abs(stacked[:, -1]).max())
    if edge > DECAY_TOLERANCE * peak:
        raise ConfigError(
            f"initial data does not decay at the grid boundary (edge/peak = {edge / peak:.3e})"
        )


def gaussian_data(n: int, plates: Sequence[int], **kwargs) -> InitialData:
    return InitialData(n, tuple(GaussianBump(p, **kwargs) for p in plates))


# ---------------------------------------------------------------------------
# JSON


def _bump_from_json(entry: dict) -> GaussianBump:
    kind = entry.get("field", "amplitude")
    if kind not in ("amplitude", "velocity"):
        raise ConfigError(f"unknown initial field {kind!r}")
    return GaussianBump(
        plate=int(entry["plate"]),
        center=float(entry.get("center", DEFAULT_CENTER)),
        width=float(entry.get("width", DEFAULT_WIDTH)),
        amplitude=float(entry.get("amplitude", DEFAULT_AMPLITUDE)),
        velocity=kind == "velocity",
    )


def config_from_dict(doc: dict) -> tuple[ValidatedConfig, InitialData]:
    """Parse ``{"heights": [...], "flows": [...], "initial": [...]}``."""
    try:
        cfg = validate(ChannelConfig(tuple(doc["heights"]), tuple(doc["flows"])))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    bumps = tuple(_bump_from_json(e) for e in doc.get("initial", []))
    return cfg, InitialData(cfg.n, bumps)


def load_config(path) -> tuple[ValidatedConfig, InitialData]:
    with open(Path(path), encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)
