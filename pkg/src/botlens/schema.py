"""Behavioral feature schema for tabular player logs."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from botlens.errors import DataError

CATEGORIES = ("player_information", "player_action", "social_activity")
KINDS = ("count", "hours", "amount", "ratio")


class ClassLabel(enum.IntEnum):
    """Player class. Integer values double as model output indices."""

    HUMAN = 0
    BOT = 1
    HEAVY_USER = 2

    @property
    def token(self) -> str:
        return _TOKENS[self]

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        key = text.strip().lower()
        for label, token in _TOKENS.items():
            if token == key:
                return label
        raise DataError(f"unknown class label {text!r}")


_TOKENS = {
    ClassLabel.HUMAN: "human",
    ClassLabel.BOT: "bot",
    ClassLabel.HEAVY_USER: "heavy_user",
}

BINARY_CLASSES = (ClassLabel.HUMAN, ClassLabel.BOT)
THREE_CLASSES = (ClassLabel.HUMAN, ClassLabel.BOT, ClassLabel.HEAVY_USER)


# (name, category, kind) in log-table column order, 1-based index in the comment.
_DEFAULT_FEATURES = (
    ("login_count", "player_information", "count"),  # 1
    ("logout_count", "player_information", "count"),  # 2
    ("playtime_total", "player_information", "hours"),  # 3
    ("playtime_per_day", "player_information", "hours"),  # 4
    ("avg_money", "player_information", "amount"),  # 5
    ("login_day_count", "player_information", "count"),  # 6
    ("ip_count", "player_information", "count"),  # 7
    ("max_level", "player_information", "count"),  # 8
    ("collect_max_count", "player_action", "count"),  # 9
    ("sit_count", "player_action", "count"),  # 10
    ("sit_count_per_day", "player_action", "amount"),
    ("sit_ratio", "player_action", "ratio"),
    ("exp_get_count", "player_action", "count"),  # 13
    ("exp_get_count_per_day", "player_action", "amount"),
    ("exp_get_ratio", "player_action", "ratio"),
    ("item_get_count", "player_action", "count"),  # 16
    ("item_get_count_per_day", "player_action", "amount"),
    ("item_get_ratio", "player_action", "ratio"),
    ("money_get_count", "player_action", "count"),  # 19
    ("money_get_count_per_day", "player_action", "amount"),
    ("money_get_ratio", "player_action", "ratio"),
    ("abyss_get_count", "player_action", "count"),  # 22
    ("abyss_get_count_per_day", "player_action", "amount"),
    ("abyss_get_ratio", "player_action", "ratio"),
    ("exp_repair_count", "player_action", "count"),  # 25
    ("exp_repair_count_per_day", "player_action", "amount"),
    ("portal_count", "player_action", "count"),  # 27
    ("portal_count_per_day", "player_action", "amount"),
    ("killed_count", "player_action", "count"),  # 29
    ("killed_count_per_day", "player_action", "amount"),
    ("killed_by_player_count", "player_action", "count"),
    ("killed_by_monster_count", "player_action", "count"),
    ("teleport_count", "player_action", "count"),  # 33
    ("teleport_count_per_day", "player_action", "amount"),
    ("reborn_count", "player_action", "count"),  # 35
    ("reborn_count_per_day", "player_action", "amount"),
    ("party_time_ratio", "social_activity", "ratio"),  # 37
    ("guild_act_count", "social_activity", "count"),
    ("guild_join_count", "social_activity", "count"),
    ("social_diversity", "social_activity", "amount"),  # 40
)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names with a category and value kind per feature.

    Every kind except ``ratio`` must be non-negative; ratios live in [0, 1].
    """

    names: tuple[str, ...]
    categories: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if not (len(self.names) == len(self.categories) == len(self.kinds)):
            raise DataError("schema names, categories and kinds differ in length")
        if any(not n for n in self.names):
            raise DataError("schema contains an empty feature name")
        if len(set(self.names)) != len(self.names):
            raise DataError("schema feature names are not unique")
        for c in self.categories:
            if c not in CATEGORIES:
                raise DataError(f"unknown feature category {c!r}")
        for k in self.kinds:
            if k not in KINDS:
                raise DataError(f"unknown feature kind {k!r}")

    @classmethod
    def default(cls) -> "FeatureSchema":
        names, cats, kinds = zip(*_DEFAULT_FEATURES)
        return cls(tuple(names), tuple(cats), tuple(kinds))

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"feature {name!r} not in schema") from None

    def indices(self, names) -> list[int]:
        return [self.index(n) for n in names]

    def without(self, names) -> "FeatureSchema":
        drop = set(names)
        missing = drop - set(self.names)
        if missing:
            raise DataError(f"features not in schema: {sorted(missing)}")
        keep = [i for i, n in enumerate(self.names) if n not in drop]
        return self.subset(keep)

    def subset(self, indices) -> "FeatureSchema":
        return FeatureSchema(
            tuple(self.names[i] for i in indices),
            tuple(self.categories[i] for i in indices),
            tuple(self.kinds[i] for i in indices),
        )

    def ratio_mask(self) -> list[bool]:
        return [k == "ratio" for k in self.kinds]
