"""System dimensions, network geometry, pathloss and noise scalars.

Everything downstream (channel synthesis, estimation, optimization) consumes
the plain scalars derived here.  All conversions are dB/dBm <-> linear with a
normalized noise variance of 1 when pathloss normalization is active.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"linear value must be positive, got {x}")
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class PathlossModel:
    """mmWave pathloss PL(d) = alpha + beta*10*log10(d) + chi, chi ~ N(0, shadow_var_db).

    When ``enabled`` is False every path gain is forced to exactly 1 and the
    transmit power is interpreted directly as an SNR P/sigma^2.
    """

    alpha_pl: float = 61.4
    beta_pl: float = 2.0
    shadow_var_db: float = 5.8
    enabled: bool = True

    def __post_init__(self):
        if self.beta_pl < 0:
            raise ValueError("beta_pl must be >= 0")
        if self.shadow_var_db < 0:
            raise ValueError("shadow_var_db must be >= 0")


def pathloss_db(model: PathlossModel, d: float, shadow_draw: float = 0.0) -> float:
    """Pathloss in dB at distance d (meters).

    ``shadow_draw`` is a caller-supplied standard-normal value; the shadowing
    term is shadow_draw * sqrt(shadow_var_db) so realizations stay
    reproducible from one seed.
    """
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    chi = shadow_draw * math.sqrt(model.shadow_var_db)
    return model.alpha_pl + model.beta_pl * 10.0 * math.log10(d) + chi


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power -174 + 10*log10(W) + n_f in dBm."""
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def path_gain_linear(
    model: PathlossModel, d: float, shadow_draw: float, noise_dbm: float
) -> float:
    """Linear large-scale gain 10^(gamma/10), gamma = -(PL(d) + P_noise) dB.

    Normalizing against the noise power lets the rest of the pipeline use a
    unit noise variance.  Returns exactly 1 when the model is disabled.
    """
    if not model.enabled:
        return 1.0
    gamma_db = -(pathloss_db(model, d, shadow_draw) + noise_dbm)
    return db_to_linear(gamma_db)


@dataclass(frozen=True)
class Geometry:
    """2D layout: BS at ``bs_position``, users in a disc, RISs at fixed points."""

    bs_position: tuple[float, float] = (0.0, 0.0)
    circle_center_distance: float = 60.0
    user_radius: float = 20.0
    ris_positions: tuple[tuple[float, float], ...] = ((20.0, 20.0), (20.0, -20.0))

    def __post_init__(self):
        if self.circle_center_distance < 0 or self.user_radius < 0:
            raise ValueError("distances must be >= 0")
        if len(self.ris_positions) < 1:
            raise ValueError("at least one RIS position required")


def default_geometry(
    n_ris: int, d_c: float = 60.0, r_c: float = 20.0, d_x: float = 20.0, d_y: float = 20.0
) -> Geometry:
    """RIS 1 at (d_x, d_y), RIS 2 at (d_x, -d_y); further RISs continue up/down
    the same vertical line at d_y spacing.  The layout rule beyond two RISs is
    a documented stand-in, not a modeling claim.
    """
    positions = []
    for idx in range(n_ris):
        sign = 1.0 if idx % 2 == 0 else -1.0
        step = 1 + idx // 2
        positions.append((d_x, sign * d_y * step))
    return Geometry(
        circle_center_distance=d_c, user_radius=r_c, ris_positions=tuple(positions)
    )


def place_users(geometry: Geometry, k: int, rng: np.random.Generator) -> np.ndarray:
    """k points uniform in the user disc, shape (k, 2)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    r = geometry.user_radius * np.sqrt(rng.uniform(size=k))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=k)
    center = np.array([geometry.circle_center_distance, 0.0])
    return center + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


@dataclass(frozen=True)
class SystemConfig:
    """All dimensions and physical constants of one scenario."""

    n_bs_antennas: int = 16
    n_users: int = 4
    n_ris: int = 2
    ris_elems_y: int = 8
    ris_elems_z: int = 8
    tx_power_dbm: float = 20.0
    noise_variance: float = 1.0
    carrier_spacing_ratios: tuple[float, float, float] = (0.5, 0.5, 0.5)
    n_paths_bs_ris: int = 2
    n_paths_ris_user: int = 2
    bandwidth_hz: float = 1e9
    noise_figure_db: float = 5.0
    ul_train_power_dbm: float = 0.0
    ul_train_len: int = 0  # 0 means "use the minimum M*K"
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_bs_antennas", "n_users", "n_ris", "ris_elems_y", "ris_elems_z",
                     "n_paths_bs_ris", "n_paths_ris_user"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be > 0")
        if any(r <= 0 for r in self.carrier_spacing_ratios):
            raise ValueError("carrier spacing ratios must be > 0")
        if self.ul_train_len == 0:
            object.__setattr__(self, "ul_train_len", self.m_ris * self.n_users)
        if self.ul_train_len < self.m_ris * self.n_users:
            raise ValueError(
                f"ul_train_len must be >= M*K = {self.m_ris * self.n_users}, "
                f"got {self.ul_train_len}"
            )
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")

    @property
    def m_ris(self) -> int:
        return self.ris_elems_y * self.ris_elems_z

    @property
    def noise_over_power(self) -> float:
        """sigma^2 / P with P converted from dBm against sigma^2-normalized units."""
        return self.noise_variance / db_to_linear(self.tx_power_dbm)

    @property
    def ul_train_power_linear(self) -> float:
        return db_to_linear(self.ul_train_power_dbm)


@dataclass(frozen=True)
class Scenario:
    """A ready-to-simulate bundle of config, geometry and pathloss model."""

    config: SystemConfig = field(default_factory=SystemConfig)
    geometry: Geometry | None = None
    pathloss: PathlossModel = field(default_factory=PathlossModel)

    def __post_init__(self):
        if self.geometry is None:
            object.__setattr__(self, "geometry", default_geometry(self.config.n_ris))
        if len(self.geometry.ris_positions) != self.config.n_ris:
            raise ValueError(
                f"geometry has {len(self.geometry.ris_positions)} RIS positions, "
                f"config expects {self.config.n_ris}"
            )


def _build_strict(cls, data: dict, label: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {label} keys: {sorted(unknown)}")
    kwargs = dict(data)
    for key in ("carrier_spacing_ratios", "bs_position"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    if "ris_positions" in kwargs:
        kwargs["ris_positions"] = tuple(tuple(p) for p in kwargs["ris_positions"])
    return cls(**kwargs)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a JSON-style document.

    Top-level keys are SystemConfig fields plus optional ``geometry`` and
    ``pathloss`` sections.  Unknown keys are rejected at every level.
    """
    doc = dict(doc)
    geometry = doc.pop("geometry", None)
    pathloss = doc.pop("pathloss", None)
    config = _build_strict(SystemConfig, doc, "config")
    geo = _build_strict(Geometry, geometry, "geometry") if geometry is not None else None
    if geo is None and pathloss is not None and not pathloss.get("enabled", True):
        pass  # geometry defaults still apply; gains are forced to 1 anyway
    pl = _build_strict(PathlossModel, pathloss, "pathloss") if pathloss is not None else PathlossModel()
    if geo is None:
        geo = default_geometry(config.n_ris)
    return Scenario(config=config, geometry=geo, pathloss=pl)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
