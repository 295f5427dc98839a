import json
from collections import defaultdict

from packing.catalog import dedup
from packing.conf import override
from packing.dataset import load_aliases, load_scene_set
from packing.evaluation import random_baseline, resolve_planned
from packing.exceptions import ConfigurationError
from packing.planner import Method, plan_exact, plan_greedy, plan_local_search
from packing.preference import load_matrix
from packing.scoring import average_score, decode_extended, encode_extended, format_score, score

from ._base import PackingCommand, split_items

BENCH_METHODS = [Method.EXACT, Method.GREEDY, Method.LOCAL_SEARCH, Method.RANDOM]


def _summary(values):
    if not values:
        return {"ac": None, "infinite_count": 0, "scenes": 0}
    avg = average_score(values)
    return {"ac": encode_extended(avg.value), "infinite_count": avg.infinite_count, "scenes": avg.count}


class Command(PackingCommand):
    help = (
        "Compare the planners against a random packing order on the ground-truth "
        "items of every scene, per scene size."
    )

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--scenes", required=True, help="Scene set file {catalog, size_range, scenes}")
        parser.add_argument("--matrix", required=True, help="Preference model document")
        parser.add_argument("--methods", default="exact,greedy,local_search,random",
                            help="Comma-separated subset of exact, greedy, local_search, random")
        parser.add_argument("--seed", type=int, help="Base seed (default from settings)")
        parser.add_argument("--random-seeds", type=int, default=50, help="Random orders averaged per scene")
        parser.add_argument("--restarts", type=int, help="Local search restarts")
        parser.add_argument("--exact-max-items", type=int, help="Scenes with more distinct items skip the exact planner")
        parser.add_argument("--aliases", help="Alias file mapping free-form labels to classes")
        parser.add_argument("--out", help="Write the comparison document here")

    def run(self, config, **options):
        try:
            methods = [Method(m) for m in split_items(options["methods"])]
        except ValueError as exc:
            raise ConfigurationError(f"Unknown method in --methods: {exc}") from exc
        if not methods or any(m not in BENCH_METHODS for m in methods):
            raise ConfigurationError(f"--methods must name some of {[m.value for m in BENCH_METHODS]}")
        if options["random_seeds"] < 1:
            raise ConfigurationError("--random-seeds must be at least 1")
        limits = override(
            config.planner,
            exact_max_items=options["exact_max_items"],
            local_search_restarts=options["restarts"],
        )
        seed = config.seed if options["seed"] is None else options["seed"]

        scene_set = load_scene_set(options["scenes"], enforce_catalog=False, default_range=config.size_range)
        matrix = load_matrix(options["matrix"])
        if options["aliases"]:
            matrix = matrix.with_aliases(load_aliases(options["aliases"]))

        by_size = defaultdict(lambda: defaultdict(list))
        skipped = defaultdict(int)
        unmatched = 0
        for scene in scene_set.scenes:
            items, missing = resolve_planned(dedup(scene.ground_truth), matrix)
            unmatched += len(missing)
            items = dedup(items)
            if not items:
                continue
            for method in methods:
                if method is Method.EXACT:
                    if len(items) > limits.exact_max_items:
                        skipped[method.value] += 1
                        continue
                    value = score(plan_exact(items, matrix, limits), matrix).value
                elif method is Method.GREEDY:
                    value = score(plan_greedy(items, matrix), matrix).value
                elif method is Method.LOCAL_SEARCH:
                    value = score(plan_local_search(items, matrix, seed, limits.local_search_restarts), matrix).value
                else:
                    value = random_baseline(items, matrix, options["random_seeds"], seed)
                by_size[scene.size][method.value].append(value)

        document = {
            "provenance": {
                "matrix_sha256": matrix.digest(),
                "methods": [m.value for m in methods],
                "seed": seed,
                "random_seeds": options["random_seeds"],
                "local_search_restarts": limits.local_search_restarts,
                "exact_max_items": limits.exact_max_items,
                "scene_count": len(scene_set),
            },
            "by_scene_size": {
                str(size): {m.value: _summary(by_size[size][m.value]) for m in methods}
                for size in sorted(by_size)
            },
            "overall": {
                m.value: _summary([v for size in by_size for v in by_size[size][m.value]])
                for m in methods
            },
            "skipped": dict(skipped),
            "unmatched_labels": unmatched,
        }

        if options["out"]:
            with open(options["out"], "w", encoding="utf-8") as f:
                f.write(json.dumps(document, indent=2, sort_keys=True) + "\n")

        header = f"{'size':>4}" + "".join(f"  {m.value:>12}" for m in methods)
        self.stdout.write(header)
        for size, row in document["by_scene_size"].items():
            cells = "".join(f"  {self._cell(row[m.value]):>12}" for m in methods)
            self.stdout.write(f"{size:>4}{cells}")
        overall = "".join(f"  {self._cell(document['overall'][m.value]):>12}" for m in methods)
        self.stdout.write(f"{'all':>4}{overall}")
        for method, count in sorted(skipped.items()):
            self.stdout.write(f"{method} skipped on {count} scenes above {limits.exact_max_items} items")

    @staticmethod
    def _cell(summary):
        if summary["ac"] is None:
            return "n/a"
        return format_score(decode_extended(summary["ac"]))
