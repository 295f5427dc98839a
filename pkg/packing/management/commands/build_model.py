from packing.dataset import load_survey
from packing.models import PreferenceModel
from packing.preference import build_matrix, dump_matrix, serialize_matrix

from ._base import PackingCommand


class Command(PackingCommand):
    help = "Build a pairwise placement preference model from a survey file."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--survey", required=True, help="Survey file {direction, sequences: [{participant, items}]}")
        parser.add_argument("--alpha", type=float, help="Additive smoothing on observed pairs (default from settings)")
        parser.add_argument("--out", help="Write the matrix document here; printed to stdout otherwise")
        parser.add_argument("--save", metavar="NAME", help="Store the model in the database under NAME")

    def run(self, config, **options):
        alpha = config.alpha if options["alpha"] is None else options["alpha"]
        matrix = build_matrix(load_survey(options["survey"]), alpha)
        digest = matrix.digest()

        if options["out"]:
            dump_matrix(matrix, options["out"])
            self.stdout.write(f"Wrote {len(matrix)}-class model to {options['out']} (sha256 {digest})")
        elif not options["save"]:
            self.write_json(serialize_matrix(matrix))

        if options["save"]:
            model, created = PreferenceModel.objects.update_or_create(
                name=options["save"],
                defaults={
                    "document": serialize_matrix(matrix),
                    "digest": digest,
                    "class_count": len(matrix),
                    "alpha": matrix.alpha,
                },
            )
            verb = "Created" if created else "Updated"
            self.stdout.write(f"{verb} preference model '{model.name}' (id {model.pk})")
