from pathlib import Path

from packing.dataset import load_aliases
from packing.exceptions import ConfigurationError, DatasetError, ScoringError
from packing.preference import load_matrix
from packing.scoring import (
    PackingSequence,
    constraint_satisfaction_rate,
    encode_extended,
    format_score,
    score,
)

from ._base import PackingCommand, split_items


class Command(PackingCommand):
    help = (
        "Packing Consistency Score of one sequence. Sequences are bottom-first "
        "(first item placed lowest) unless --top-first is given."
    )

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--matrix", required=True, help="Preference model document")
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--sequence", help='Comma-separated items, e.g. "bottle,apples,bananas"')
        group.add_argument("--sequence-file", help="File holding the items, comma- or newline-separated")
        parser.add_argument("--top-first", action="store_true", help="The sequence lists the top item first")
        parser.add_argument("--aliases", help="Alias file mapping free-form labels to classes")
        parser.add_argument("--json", action="store_true", help="Print a JSON document instead of text")

    def run(self, config, **options):
        matrix = load_matrix(options["matrix"])
        if options["aliases"]:
            matrix = matrix.with_aliases(load_aliases(options["aliases"]))

        if options["sequence_file"]:
            try:
                text = Path(options["sequence_file"]).read_text(encoding="utf-8")
            except OSError as exc:
                raise DatasetError(f"Cannot read sequence file: {exc}") from exc
        else:
            text = options["sequence"]
        items = split_items(text)
        if not items:
            raise ConfigurationError("The sequence is empty")
        sequence = PackingSequence.from_labels(items, top_first=options["top_first"])

        consistency = score(sequence, matrix)
        try:
            satisfaction = constraint_satisfaction_rate(sequence, matrix)
        except ScoringError:
            satisfaction = None

        if options["json"]:
            self.write_json({
                "sequence": list(sequence.items),
                "score": encode_extended(consistency.value),
                "satisfaction_rate": satisfaction,
                "pair_terms": [
                    {"lower": t.lower, "upper": t.upper, "p": t.p, "q": t.q,
                     "probability": t.probability, "log_prob": encode_extended(t.log_prob)}
                    for t in consistency.pair_terms
                ],
            })
            return

        self.stdout.write(f"C = {format_score(consistency.value)}")
        for t in consistency.pair_terms:
            self.stdout.write(f"  {t.lower} below {t.upper}: P={t.probability:.4f}  ln={format_score(t.log_prob)}")
        if satisfaction is not None:
            self.stdout.write(f"satisfaction rate = {satisfaction:.4f}")
