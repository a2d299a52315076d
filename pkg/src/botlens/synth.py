"""Seeded synthetic player populations with known informative features.

Three archetypes are drawn: normal humans, heavy users (humans whose
progression statistics look bot-like) and bots. Every feature is produced
from a latent standard normal through a per-archetype marginal:

* ``lognormal``: ``exp(location + scale * z)``
* ``beta``: beta quantile of ``Phi(z)`` with mean ``location`` and
  concentration ``scale``
* ``discrete``: ``floor`` of the lognormal draw (a Poisson-like count)

Latents may share a per-record factor (``loading``) so that the heavy-user
markers rise together. Noise features use one marginal for every archetype.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from botlens.dataset import LabeledDataset, dumps_csv
from botlens.errors import DataError
from botlens.schema import ClassLabel, FeatureSchema

ARCHETYPES = ("normal_human", "heavy_user", "bot")
FAMILIES = ("lognormal", "beta", "discrete")
OBSERVATION_DAYS = 88


@dataclass(frozen=True)
class FeatureDist:
    family: str
    location: float
    scale: float
    upper: Optional[float] = None
    loading: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown distribution family {self.family!r}")
        if not self.scale > 0:
            raise DataError("distribution scale must be strictly positive")
        if self.family == "beta" and not 0 < self.location < 1:
            raise DataError("beta mean must lie in (0, 1)")
        if not -1 < self.loading < 1:
            raise DataError("shared-factor loading must lie in (-1, 1)")

    def transform(self, z: np.ndarray) -> np.ndarray:
        if self.family == "beta":
            a = self.location * self.scale
            b = (1.0 - self.location) * self.scale
            v = stats.beta.ppf(stats.norm.cdf(z), a, b)
        else:
            v = np.exp(self.location + self.scale * z)
            if self.family == "discrete":
                v = np.floor(v)
        if self.upper is not None:
            v = np.minimum(v, self.upper)
        return v

    def shifted(self, sd: float, **changes) -> "FeatureDist":
        """Move the latent location by ``sd`` standard deviations."""
        if self.family == "beta":
            # mean shift in units of the marginal's standard deviation
            m = self.location
            step = math.sqrt(m * (1 - m) / (self.scale + 1))
            loc = min(max(m + sd * step, 0.02), 0.98)
            return replace(self, location=loc, **changes)
        return replace(self, location=self.location + sd * self.scale, **changes)


@dataclass(frozen=True)
class ArchetypeParams:
    """Per-archetype, per-feature marginals plus the ground-truth feature sets.

    ``informative`` is ordered from strongest to weakest contribution to
    separating bots from the human population.
    """

    schema: FeatureSchema
    dists: dict  # archetype -> tuple[FeatureDist, ...] aligned to schema
    informative: tuple[str, ...]

    def __post_init__(self):
        for a in ARCHETYPES:
            if a not in self.dists:
                raise DataError(f"missing archetype {a!r}")
            if len(self.dists[a]) != len(self.schema):
                raise DataError(f"archetype {a!r} does not describe every schema feature")
        self.schema.indices(self.informative)

    @property
    def non_informative(self) -> tuple[str, ...]:
        return tuple(n for n in self.schema.names if n not in self.informative)

    def to_dict(self) -> dict:
        return {
            "informative": list(self.informative),
            "archetypes": {
                a: {n: asdict(d) for n, d in zip(self.schema.names, self.dists[a])} for a in ARCHETYPES
            },
        }


# Base marginals for the normal-human population. Latent shifts for the
# other archetypes are expressed in standard deviations below.
_BASE = {
    "login_count": ("discrete", math.log(60), 0.5),
    "logout_count": ("discrete", math.log(58), 0.5),
    "playtime_total": ("lognormal", math.log(120), 0.6),
    "playtime_per_day": ("lognormal", math.log(2.5), 0.3, 24.0),
    "avg_money": ("lognormal", math.log(50000), 1.0),
    "login_day_count": ("discrete", math.log(30), 0.3, OBSERVATION_DAYS),
    "ip_count": ("discrete", math.log(3), 0.5),
    "max_level": ("discrete", math.log(30), 0.6, 65),
    "collect_max_count": ("lognormal", math.log(20), 0.3),
    "sit_count": ("discrete", math.log(200), 0.3),
    "sit_count_per_day": ("lognormal", math.log(6), 0.5),
    "sit_ratio": ("beta", 0.2, 20.0),
    "exp_get_count": ("discrete", math.log(3000), 0.3),
    "exp_get_count_per_day": ("lognormal", math.log(100), 0.3),
    "exp_get_ratio": ("beta", 0.3, 20.0),
    "item_get_count": ("discrete", math.log(1500), 0.5),
    "item_get_count_per_day": ("lognormal", math.log(50), 0.3),
    "item_get_ratio": ("beta", 0.25, 20.0),
    "money_get_count": ("discrete", math.log(800), 0.5),
    "money_get_count_per_day": ("lognormal", math.log(25), 0.5),
    "money_get_ratio": ("beta", 0.15, 20.0),
    "abyss_get_count": ("discrete", math.log(100), 0.7),
    "abyss_get_count_per_day": ("lognormal", math.log(3), 0.7),
    "abyss_get_ratio": ("beta", 0.05, 30.0),
    "exp_repair_count": ("discrete", math.log(10), 0.6),
    "exp_repair_count_per_day": ("lognormal", math.log(0.3), 0.6),
    "portal_count": ("discrete", math.log(80), 0.6),
    "portal_count_per_day": ("lognormal", math.log(2.5), 0.6),
    "killed_count": ("discrete", math.log(40), 0.6),
    "killed_count_per_day": ("lognormal", math.log(1.2), 0.6),
    "killed_by_player_count": ("discrete", math.log(15), 0.7),
    "killed_by_monster_count": ("discrete", math.log(25), 0.6),
    "teleport_count": ("discrete", math.log(150), 0.6),
    "teleport_count_per_day": ("lognormal", math.log(5), 0.6),
    "reborn_count": ("discrete", math.log(30), 0.6),
    "reborn_count_per_day": ("lognormal", math.log(1.0), 0.6),
    "party_time_ratio": ("beta", 0.3, 10.0),
    "guild_act_count": ("discrete", math.log(50), 0.8),
    "guild_join_count": ("discrete", math.log(2), 0.5),
    "social_diversity": ("lognormal", math.log(8), 0.6),
}

# Latent shifts (in SDs of the human marginal) for heavy users and bots.
# Bots sit further out than heavy users on every informative feature, most
# of all on session regularity (playtime, login days). Heavy users match
# bots closely on the progression-efficiency markers.
_SHIFTS = {
    #                        heavy, bot
    "playtime_per_day": (2.5, 3.5),
    "login_day_count": (0.5, 2.5),
    "exp_get_count_per_day": (3.0, 3.6),
    "item_get_count_per_day": (2.8, 3.3),
    "exp_get_count": (2.8, 3.3),
    "sit_count": (2.4, 3.0),
    "exp_get_ratio": (3.0, 3.6),
    "collect_max_count": (3.0, 3.6),
}
_HEAVY_MARKERS = ("exp_get_ratio", "collect_max_count", "exp_get_count_per_day")
_HEAVY_LOADING = 0.99


def default_archetypes(schema: Optional[FeatureSchema] = None) -> ArchetypeParams:
    schema = schema or FeatureSchema.default()
    base = []
    for name in schema.names:
        family, loc, scale, *upper = _BASE[name]
        base.append(FeatureDist(family, loc, scale, upper[0] if upper else None))
    heavy, bot = list(base), list(base)
    for name, (h_sd, b_sd) in _SHIFTS.items():
        j = schema.index(name)
        loading = _HEAVY_LOADING if name in _HEAVY_MARKERS else 0.0
        heavy[j] = base[j].shifted(h_sd, loading=loading)
        bot[j] = base[j].shifted(b_sd)
    return ArchetypeParams(
        schema,
        {"normal_human": tuple(base), "heavy_user": tuple(heavy), "bot": tuple(bot)},
        tuple(_SHIFTS),
    )


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 5000
    bot_fraction: float = 0.125
    heavy_fraction: float = 0.1
    noise_feature_count: Optional[int] = None  # None -> every non-informative feature
    seed: int = 0
    collapse_heavy: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise DataError("n must be non-negative")
        if not 0 < self.bot_fraction < 1:
            raise DataError("bot_fraction must lie in (0, 1)")
        if not 0 <= self.heavy_fraction < 1:
            raise DataError("heavy_fraction must lie in [0, 1)")
        if self.bot_fraction + self.heavy_fraction >= 1:
            raise DataError("bot_fraction + heavy_fraction must be < 1")
        if self.noise_feature_count is not None and not 0 <= self.noise_feature_count <= 40:
            raise DataError("noise_feature_count must lie in [0, 40]")


@dataclass(frozen=True)
class GroundTruth:
    informative: tuple[str, ...]
    noise: tuple[str, ...]
    archetype_counts: dict = field(default_factory=dict)


def _archetype_counts(cfg: GeneratorConfig) -> dict[str, int]:
    n_bot = math.floor(cfg.n * cfg.bot_fraction + 0.5)
    n_heavy = math.floor(cfg.n * cfg.heavy_fraction + 0.5)
    return {"normal_human": cfg.n - n_bot - n_heavy, "heavy_user": n_heavy, "bot": n_bot}


def noise_features(config: GeneratorConfig, params: ArchetypeParams) -> tuple[str, ...]:
    """Features forced to share one marginal across archetypes.

    Non-informative features of the default archetypes already do; the
    count bounds how many of them are reported as designated noise.
    """
    pool = params.non_informative
    k = len(pool) if config.noise_feature_count is None else config.noise_feature_count
    if k > len(pool):
        raise DataError(
            f"noise_feature_count={k} exceeds the {len(pool)} non-informative features"
        )
    return pool[:k]


def generate(config: GeneratorConfig, params: Optional[ArchetypeParams] = None) -> LabeledDataset:
    """Draw ``config.n`` labeled records.

    Records come out shuffled; ids are ``p00000``-style and follow output
    order. Heavy users carry the HeavyUser label unless
    ``config.collapse_heavy`` folds them into Human. Ground truth lands in
    ``ds.meta``.
    """
    params = params or default_archetypes()
    schema = params.schema
    noise = noise_features(config, params)
    noise_idx = schema.indices(noise)
    counts = _archetype_counts(config)
    rng = np.random.default_rng(config.seed)

    labels = {
        "normal_human": ClassLabel.HUMAN,
        "heavy_user": ClassLabel.HUMAN if config.collapse_heavy else ClassLabel.HEAVY_USER,
        "bot": ClassLabel.BOT,
    }
    blocks, codes = [], []
    for arch in ARCHETYPES:
        m = counts[arch]
        dists = list(params.dists[arch])
        for j in noise_idx:
            dists[j] = params.dists["normal_human"][j]
        eps = rng.standard_normal((m, len(schema)))
        shared = rng.standard_normal((m, 1))
        load = np.array([d.loading for d in dists])
        Z = np.sqrt(1 - load**2) * eps + load * shared
        block = np.column_stack([d.transform(Z[:, j]) for j, d in enumerate(dists)]) if m else np.empty((0, len(schema)))
        blocks.append(block)
        codes.append(np.full(m, int(labels[arch])))
    X = np.vstack(blocks)
    y = np.concatenate(codes)
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    ratio = np.array(schema.ratio_mask())
    X[:, ratio] = np.clip(X[:, ratio], 0.0, 1.0)
    X[:, ~ratio] = np.maximum(X[:, ~ratio], 0.0)
    ids = tuple(f"p{i:05d}" for i in range(len(y)))
    truth = GroundTruth(params.informative, noise, counts)
    meta = {
        "informative_features": list(truth.informative),
        "noise_features": list(truth.noise),
        "archetype_counts": truth.archetype_counts,
        "seed": config.seed,
        "config": asdict(config),
    }
    return LabeledDataset(schema, ids, X, y, meta)


def metadata(ds: LabeledDataset, params: Optional[ArchetypeParams] = None) -> dict:
    params = params or default_archetypes(ds.schema)
    return {**ds.meta, "archetype_params": params.to_dict()}


def write_dataset(ds: LabeledDataset, path, params: Optional[ArchetypeParams] = None) -> Path:
    """CSV plus a ``<stem>.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    path.write_text(dumps_csv(ds, include_labels=True), encoding="utf-8")
    sidecar = path.with_suffix(".meta.json")
    sidecar.write_text(json.dumps(metadata(ds, params), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar
