import re
from dataclasses import dataclass, field
from types import MappingProxyType

from .exceptions import LabelError


_WHITESPACE = re.compile(r"\s+")
_QUALIFIER = re.compile(r"\([^)]*\)")


def normalize_label(text):
    """Lowercase, trim and collapse inner whitespace."""
    return _WHITESPACE.sub(" ", str(text)).strip().lower()


def class_label(text):
    label = normalize_label(text)
    if not label:
        raise LabelError(f"Empty class label: {text!r}")
    if "," in label:
        raise LabelError(f"Class label contains a comma: {text!r}")
    return label


def strip_qualifiers(label):
    # "eggs (fragile)" -> "eggs"
    return normalize_label(_QUALIFIER.sub(" ", label))


def singular_forms(label):
    forms = {label}
    if label.endswith("es"):
        forms.add(label[:-2])
    if label.endswith("s"):
        forms.add(label[:-1])
    return forms


def labels_match(a, b):
    """Equal after naive plural stripping of either side."""
    return bool(singular_forms(a) & singular_forms(b))


def dedup(labels):
    seen = set()
    out = []
    for label in labels:
        if label not in seen:
            seen.add(label)
            out.append(label)
    return out


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered set of known grocery classes plus an alias table."""

    classes: tuple
    aliases: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        classes = tuple(class_label(c) for c in self.classes)
        if len(set(classes)) != len(classes):
            raise LabelError(f"Duplicate classes in catalog: {classes}")
        aliases = {normalize_label(k): class_label(v) for k, v in dict(self.aliases).items()}
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "aliases", MappingProxyType(aliases))
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(classes)})
        by_form = {}
        for c in classes:
            for form in singular_forms(c):
                by_form.setdefault(form, c)
        object.__setattr__(self, "_by_form", by_form)

    def __len__(self):
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __contains__(self, label):
        return normalize_label(label) in self._index

    def __eq__(self, other):
        if not isinstance(other, ClassCatalog):
            return NotImplemented
        return self.classes == other.classes and dict(self.aliases) == dict(other.aliases)

    def __hash__(self):
        return hash(self.classes)

    def with_aliases(self, aliases):
        merged = dict(self.aliases)
        merged.update(aliases or {})
        return ClassCatalog(self.classes, MappingProxyType(merged))

    def resolve(self, label):
        """
        Map a free-form label onto a catalog class, or None.

        Tries, in order: exact match, alias table, the label with
        parenthesised qualifiers removed, naive plural stripping.
        """
        name = normalize_label(label)
        for candidate in (name, strip_qualifiers(name)):
            if candidate in self._index:
                return candidate
            aliased = self.aliases.get(candidate)
            if aliased in self._index:
                return aliased
            for form in singular_forms(candidate):
                if form in self._by_form:
                    return self._by_form[form]
        return None

    def index(self, label):
        resolved = self.resolve(label)
        if resolved is None:
            raise LabelError(f"Unknown class: {label!r}", label=label)
        return self._index[resolved]
