from packing.conf import override
from packing.dataset import load_aliases
from packing.evaluation import resolve_planned
from packing.exceptions import ScoringError
from packing.pipeline import plan_with_llm
from packing.planner import Method, PlanRequest, plan
from packing.preference import load_matrix
from packing.prompts import load_templates
from packing.provider import build_provider
from packing.scoring import (
    PackingSequence,
    constraint_satisfaction_rate,
    encode_extended,
    format_score,
    score,
)

from ._base import PackingCommand, add_provider_arguments, provider_config, split_items


class Command(PackingCommand):
    help = "Order a set of items for packing, bottom item first."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--matrix", required=True, help="Preference model document")
        parser.add_argument("--items", required=True, help='Comma-separated items, e.g. "bananas,bottle,apples"')
        parser.add_argument("--method", choices=[m.value for m in Method], default=Method.LOCAL_SEARCH.value)
        parser.add_argument("--seed", type=int, help="Seed for local_search restarts and random orders (default from settings)")
        parser.add_argument("--restarts", type=int, help="Local search restarts")
        parser.add_argument("--exact-max-items", type=int, help="Largest item count the exact planner accepts")
        parser.add_argument("--aliases", help="Alias file mapping free-form labels to classes")
        parser.add_argument("--json", action="store_true", help="Print a JSON document instead of text")
        add_provider_arguments(parser)

    def run(self, config, **options):
        matrix = load_matrix(options["matrix"])
        if options["aliases"]:
            matrix = matrix.with_aliases(load_aliases(options["aliases"]))
        limits = override(
            config.planner,
            exact_max_items=options["exact_max_items"],
            local_search_restarts=options["restarts"],
        )
        seed = config.seed if options["seed"] is None else options["seed"]
        request = PlanRequest(tuple(split_items(options["items"])), options["method"], seed, limits)

        llm = None
        if request.method is Method.LLM:
            provider = build_provider(provider_config(config, options))
            templates = load_templates(options["templates"], config.templates)

            def llm(items):
                return plan_with_llm(items, provider, templates, config.policy).sequence

        planned = plan(request, matrix, llm=llm)
        resolved, unmatched = resolve_planned(planned.items, matrix)
        sequence = PackingSequence(resolved) if resolved else None
        consistency = score(sequence, matrix) if sequence else None
        try:
            satisfaction = constraint_satisfaction_rate(sequence, matrix) if sequence else None
        except ScoringError:
            satisfaction = None

        if options["json"]:
            self.write_json({
                "method": request.method.value,
                "seed": seed,
                "sequence": list(planned.items),
                "unmatched": list(unmatched),
                "score": None if consistency is None else encode_extended(consistency.value),
                "satisfaction_rate": satisfaction,
            })
            return

        self.stdout.write(f"sequence (bottom first): {planned}")
        if request.method in (Method.RANDOM, Method.LOCAL_SEARCH):
            self.stdout.write(f"seed = {seed}")
        self.stdout.write(f"C = {format_score(None if consistency is None else consistency.value)}")
        if satisfaction is not None:
            self.stdout.write(f"satisfaction rate = {satisfaction:.4f}")
        if unmatched:
            self.stdout.write(f"not in the model: {', '.join(unmatched)}")
