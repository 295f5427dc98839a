import hashlib
import json
import logging
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import class_label
from .exceptions import DatasetError, LabelError, TemplateError
from .provider import ChatMessage

logger = logging.getLogger(__name__)

DEFAULT_LEXICON_PATH = Path(__file__).resolve().parent / "data" / "grocery_lexicon.txt"

PERCEPTION_SYSTEM = (
    "You are an intelligent AI, assisting a robot in packing a bag of groceries. "
    "As a first step, you need to identify the items in the image. "
    "Answer in a comma separated string. "
    "For example, if the image contains apples and bananas, you should answer \"apples, bananas\"."
)
PERCEPTION_USER = "Which grocery items are on the image?"

PLANNING_SYSTEM = (
    "You are an intelligent AI, assisting a robot in packing a bag of groceries. "
    "You are provided with a list of grocery items. "
    "The bag should be packed so that no item is damaged. "
    "Answer in a comma separated string. "
    "The first item on the list is loaded first and is thus the lowest in the bag. "
    "For example, if the list contains bricks and eggs, you should answer 'bricks, eggs'."
)
PLANNING_USER = "How should the following items be loaded? {item_list}"


@dataclass(frozen=True)
class MessageTemplate:
    role: str
    text: str


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    messages: tuple

    def placeholders(self):
        names = set()
        for message in self.messages:
            for _, field_name, _, _ in string.Formatter().parse(message.text):
                if field_name is not None:
                    names.add(field_name)
        return names

    def render(self, image=None, **values):
        """
        Bind placeholders and build chat messages.

        ``image`` is attached to the last user message as an opaque payload.
        """
        missing = self.placeholders() - set(values)
        if missing:
            raise TemplateError(f"Template '{self.name}' has unbound placeholders: {sorted(missing)}")
        rendered = []
        for message in self.messages:
            text = message.text.format_map(values)
            if not text.strip():
                raise TemplateError(f"Template '{self.name}' renders an empty {message.role} message")
            rendered.append(ChatMessage(message.role, text))
        if image is not None:
            last_user = max((i for i, m in enumerate(rendered) if m.role == "user"), default=None)
            if last_user is None:
                raise TemplateError(f"Template '{self.name}' has no user message to carry the image")
            rendered[last_user] = ChatMessage("user", rendered[last_user].text, image)
        return rendered

    def to_document(self):
        return [{"role": m.role, "text": m.text} for m in self.messages]

    def digest(self):
        canonical = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


DEFAULT_PERCEPTION = PromptTemplate(
    "perception",
    (MessageTemplate("system", PERCEPTION_SYSTEM), MessageTemplate("user", PERCEPTION_USER)),
)
DEFAULT_PLANNING = PromptTemplate(
    "planning",
    (MessageTemplate("system", PLANNING_SYSTEM), MessageTemplate("user", PLANNING_USER)),
)


@dataclass(frozen=True)
class TemplateSet:
    perception: PromptTemplate = DEFAULT_PERCEPTION
    planning: PromptTemplate = DEFAULT_PLANNING

    def digests(self):
        return {"perception": self.perception.digest(), "planning": self.planning.digest()}

    def to_document(self):
        return {"perception": self.perception.to_document(), "planning": self.planning.to_document()}


def templates_from_document(document):
    from .serializers import TemplateSetSerializer, flatten_errors

    serializer = TemplateSetSerializer(data=document or {})
    if not serializer.is_valid():
        path, message = flatten_errors(serializer.errors)[0]
        raise TemplateError(f"Invalid template document at '{path}': {message}")
    data = serializer.validated_data
    out = {}
    for name in ("perception", "planning"):
        if data.get(name):
            messages = tuple(MessageTemplate(m["role"], m["text"]) for m in data[name])
            out[name] = PromptTemplate(name, messages)
    template_set = TemplateSet(**out)
    if "item_list" not in template_set.planning.placeholders():
        raise TemplateError("The planning template must contain the {item_list} placeholder")
    return template_set


def load_templates(path=None, document=None):
    """Defaults, overridden by the template file at ``path`` or an inline document."""
    if path:
        try:
            with open(path, encoding="utf-8") as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise TemplateError(f"Cannot read template file {path}: {exc}") from exc
    if document is None:
        return TemplateSet()
    return templates_from_document(document)


def render_planning_prompt(items, template=DEFAULT_PLANNING):
    if not items:
        raise TemplateError("Cannot render a planning prompt for an empty item list")
    return template.render(item_list=", ".join(items))


def render_perception_prompt(template=DEFAULT_PERCEPTION, image=None):
    return template.render(image=image)


@dataclass(frozen=True)
class ReferenceLexicon:
    """Common grocery labels; only the spread of their lengths is used."""

    entries: tuple
    sigma: float

    @classmethod
    def from_entries(cls, entries, min_entries=100):
        try:
            labels = tuple(class_label(e) for e in entries if e.strip())
        except LabelError as exc:
            raise DatasetError(f"Invalid lexicon entry: {exc}") from exc
        if len(labels) < min_entries:
            raise DatasetError(f"Lexicon needs at least {min_entries} entries, got {len(labels)}")
        sigma = float(np.std([len(label) for label in labels]))
        if sigma <= 0:
            raise DatasetError("Lexicon label lengths have zero spread")
        return cls(labels, sigma)


def load_lexicon(path=None, min_entries=100):
    """One label per line; blank lines and ``#`` comments are skipped."""
    path = Path(path) if path else DEFAULT_LEXICON_PATH
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"Cannot read lexicon {path}: {exc}") from exc
    entries = [line for line in lines if line.strip() and not line.lstrip().startswith("#")]
    lexicon = ReferenceLexicon.from_entries(entries, min_entries)
    logger.debug(f"Loaded lexicon {path}: {len(lexicon.entries)} entries, sigma={lexicon.sigma:.3f}")
    return lexicon
