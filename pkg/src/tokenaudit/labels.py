"""Label space handling for token classification, including IOB2 prefix structure."""

from __future__ import annotations

from dataclasses import dataclass, field


def split_prefix(name: str) -> tuple[str, str | None]:
    """Split a class name into (entity type, prefix).

    "B-LOC" -> ("LOC", "B"), "I-LOC" -> ("LOC", "I"), "O" -> ("O", None).
    A bare "B-" or "I-" is treated as a literal class name with no prefix.
    """
    if len(name) > 2 and name[:2] in ("B-", "I-"):
        return name[2:], name[0]
    return name, None


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of class names, one of which is the non-entity class.

    ``other_class`` is the index of the non-entity class (conventionally "O").
    Class order is significant: probability matrix columns follow it.
    """

    classes: tuple[str, ...]
    other_class: int
    # (entity_type, "B"|"I"|None) per class, derived from the names
    prefix_map: tuple[tuple[str, str | None], ...] = field(init=False)

    def __post_init__(self) -> None:
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")
        if not self.classes:
            raise ValueError("label space needs at least one class")
        if not 0 <= self.other_class < len(self.classes):
            raise ValueError(f"other_class index {self.other_class} out of range")
        object.__setattr__(
            self, "prefix_map", tuple(split_prefix(c) for c in self.classes)
        )

    @classmethod
    def from_names(cls, names: list[str] | tuple[str, ...], other: str = "O") -> "LabelSpace":
        names = tuple(names)
        if other not in names:
            raise ValueError(f"non-entity class {other!r} not among classes {names}")
        return cls(classes=names, other_class=names.index(other))

    def __len__(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise KeyError(f"unknown label {name!r}") from None

    def name(self, idx: int) -> str:
        return self.classes[idx]

    @property
    def is_merged(self) -> bool:
        """True when no class carries a B-/I- prefix."""
        return all(prefix is None for _, prefix in self.prefix_map)

    def merged(self) -> tuple["LabelSpace", list[int]]:
        """Collapse B-X/I-X classes into X.

        Returns the merged space and a per-class index mapping (old -> new).
        Merged classes keep first-appearance order of their entity types.
        """
        if self.is_merged:
            raise ValueError("label space has no B-/I- prefixes to merge")
        merged_names: list[str] = []
        mapping: list[int] = []
        for entity, _ in self.prefix_map:
            if entity not in merged_names:
                merged_names.append(entity)
            mapping.append(merged_names.index(entity))
        other_entity = self.prefix_map[self.other_class][0]
        space = LabelSpace(
            classes=tuple(merged_names), other_class=merged_names.index(other_entity)
        )
        return space, mapping


# Standard CoNLL-2003 order: O first, then B-/I- pairs per entity type.
# Matches the column order of common pre-trained NER model heads.
CONLL2003_CLASSES = (
    "O",
    "B-MISC",
    "I-MISC",
    "B-PER",
    "I-PER",
    "B-ORG",
    "I-ORG",
    "B-LOC",
    "I-LOC",
)


def conll2003_space() -> LabelSpace:
    """The 9-class IOB2 label space of CoNLL-2003."""
    return LabelSpace.from_names(list(CONLL2003_CLASSES))
