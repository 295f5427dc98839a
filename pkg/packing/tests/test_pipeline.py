from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from packing.conf import ValidationPolicy
from packing.exceptions import DatasetError, EmptyDetectionError, TemplateError, ValidationExhaustedError
from packing.pipeline import (
    RetrySignal,
    SceneInput,
    match_ratio,
    parse_detection,
    plan_with_llm,
    run_pipeline,
    split_labels,
    validate_plan,
)
from packing.prompts import (
    PLANNING_SYSTEM,
    PLANNING_USER,
    MessageTemplate,
    PromptTemplate,
    ReferenceLexicon,
    TemplateSet,
    load_lexicon,
    load_templates,
    render_perception_prompt,
    render_planning_prompt,
    templates_from_document,
)
from packing.provider import ImagePayload, MockProvider
from packing.scoring import PackingSequence

from .factories import FIXTURES

# sigma 2.0 puts the outlier limit at exactly 12 characters
LEXICON = ReferenceLexicon(("apples",), 2.0)


class ParseDetectionTests(SimpleTestCase):
    def test_split_and_normalize(self):
        self.assertEqual(split_labels(" Apples,  bananas , ,Bell  Pepper,"), ["apples", "bananas", "bell pepper"])
        self.assertEqual(split_labels(None), [])

    def test_order_and_duplicates_are_kept(self):
        labels = parse_detection("milk, apples, milk", LEXICON)
        self.assertEqual(labels, ["milk", "apples", "milk"])

    def test_outlier_boundary_is_strict(self):
        kept = "a" * 12
        dropped = "b" * 13
        self.assertEqual(parse_detection(f"{kept}, {dropped}, milk", LEXICON), [kept, "milk"])

    def test_commentary_is_dropped(self):
        raw = "Apples, bananas, I can also see a wooden table in the background of this picture"
        self.assertEqual(parse_detection(raw, LEXICON), ["apples", "bananas"])

    def test_multiplier_comes_from_policy(self):
        policy = ValidationPolicy(outlier_multiplier=3.0)
        self.assertEqual(parse_detection("apples, watermelons", LEXICON, policy), ["apples"])

    def test_nothing_left(self):
        with self.assertRaises(EmptyDetectionError):
            parse_detection(" , ,", LEXICON)
        with self.assertRaises(EmptyDetectionError):
            parse_detection("there are no groceries visible in this image at all", LEXICON)

    def test_sigma_sets_the_limit(self):
        lexicon = ReferenceLexicon(("apples",), 2.5)
        self.assertEqual(parse_detection("eggs, the image clearly shows assorted beverages", lexicon), ["eggs"])

    @settings(max_examples=200, deadline=None, derandomize=True)
    @given(st.text(alphabet="abcXYZ ,\t", max_size=80))
    def test_rejoined_output_parses_to_itself(self, raw):
        try:
            labels = parse_detection(raw, LEXICON)
        except EmptyDetectionError:
            return
        self.assertEqual(parse_detection(", ".join(labels), LEXICON), labels)


class LexiconTests(SimpleTestCase):
    def test_shipped_lexicon(self):
        lexicon = load_lexicon()
        self.assertGreaterEqual(len(lexicon.entries), 100)
        self.assertGreater(lexicon.sigma, 0)
        self.assertIn("bell pepper", lexicon.entries)

    def test_too_small(self):
        with self.assertRaises(DatasetError):
            ReferenceLexicon.from_entries(["apples", "milk"])

    def test_zero_spread(self):
        with self.assertRaises(DatasetError):
            ReferenceLexicon.from_entries(["milk"] * 100, min_entries=100)


class ValidatePlanTests(SimpleTestCase):
    def test_permutation_is_accepted(self):
        result = validate_plan(["apples", "bottle"], "Bottle, apples")
        self.assertEqual(result, PackingSequence(("bottle", "apples")))

    def test_containment_either_way(self):
        self.assertEqual(match_ratio(["apples"], ["green apples"]), 1.0)
        self.assertEqual(match_ratio(["green apples"], ["apples"]), 1.0)
        self.assertEqual(match_ratio(["pears"], ["apples"]), 0.0)

    def test_threshold_is_strict(self):
        detected = [f"item{i}" for i in range(10)]
        at_threshold = validate_plan(detected, "item0, item1, item2")
        self.assertIsInstance(at_threshold, RetrySignal)
        self.assertAlmostEqual(at_threshold.ratio, 0.3)
        above = validate_plan(detected, "item0, item1, item2, item3")
        self.assertIsInstance(above, PackingSequence)

    def test_one_of_three_passes(self):
        self.assertIsInstance(validate_plan(["milk", "eggs", "bread"], "milk, rice"), PackingSequence)

    def test_refusal_asks_for_retry(self):
        result = validate_plan(["milk", "eggs"], "I cannot do that.")
        self.assertIsInstance(result, RetrySignal)
        self.assertEqual(result.ratio, 0.0)


class PromptTests(SimpleTestCase):
    def test_planning_prompt(self):
        messages = render_planning_prompt(["bottle", "apples"])
        self.assertEqual(messages[-1].role, "user")
        self.assertEqual(messages[-1].text, PLANNING_USER.format(item_list="bottle, apples"))
        self.assertEqual(messages[0].role, "system")

    def test_default_template_frames_a_grocery_bag(self):
        self.assertIn("bag of groceries", PLANNING_SYSTEM)
        for items in (["bottle"], ["eggs", "bread", "milk"]):
            rendered = " ".join(m.text for m in render_planning_prompt(items))
            self.assertIn("bag of groceries", rendered)

    def test_empty_item_list(self):
        with self.assertRaises(TemplateError):
            render_planning_prompt([])

    def test_unbound_placeholder(self):
        template = PromptTemplate("t", (MessageTemplate("user", "{item_list} for {store}"),))
        with self.assertRaises(TemplateError):
            render_planning_prompt(["milk"], template)

    def test_image_goes_to_last_user_message(self):
        image = ImagePayload(b"\xff\xd8\xff", "image/jpeg")
        messages = render_perception_prompt(image=image)
        self.assertIs(messages[-1].image, image)
        self.assertIsNone(messages[0].image)
        self.assertTrue(messages[-1].to_request()["content"][1]["image_url"]["url"].startswith("data:image/jpeg;base64,"))

    def test_template_file(self):
        templates = load_templates(FIXTURES / "templates.json")
        self.assertEqual(templates.perception, TemplateSet().perception)
        self.assertEqual(render_planning_prompt(["milk"], templates.planning)[-1].text, "Items: milk")
        self.assertNotEqual(templates.digests()["planning"], TemplateSet().digests()["planning"])

    def test_planning_template_needs_item_list(self):
        with self.assertRaises(TemplateError):
            templates_from_document({"planning": [{"role": "user", "text": "Pack these."}]})

    def test_invalid_role(self):
        with self.assertRaises(TemplateError):
            templates_from_document({"planning": [{"role": "robot", "text": "{item_list}"}]})


class PlanWithLLMTests(SimpleTestCase):
    def test_retry_then_accept(self):
        provider = MockProvider.from_responses(["Sorry, no.", "eggs, bread, milk"])
        outcome = plan_with_llm(["milk", "eggs", "bread"], provider)
        self.assertEqual(outcome.attempts, 2)
        self.assertEqual(outcome.sequence.items, ("eggs", "bread", "milk"))
        self.assertEqual(len(outcome.transcripts), 2)

    def test_exhaustion_keeps_last_response(self):
        provider = MockProvider.from_responses(["no", "nope", "still no"])
        with self.assertRaises(ValidationExhaustedError) as ctx:
            plan_with_llm(["milk", "eggs"], provider)
        self.assertEqual(ctx.exception.attempts, 3)
        self.assertEqual(ctx.exception.last_response, "still no")
        self.assertEqual(provider.remaining, 0)

    def test_max_attempts_from_policy(self):
        provider = MockProvider.from_responses(["no"])
        with self.assertRaises(ValidationExhaustedError) as ctx:
            plan_with_llm(["milk"], provider, policy=ValidationPolicy(max_attempts=1))
        self.assertEqual(ctx.exception.attempts, 1)


class RunPipelineTests(SimpleTestCase):
    def test_perception_then_planning(self):
        provider = MockProvider.from_responses(["Milk, eggs, milk", "eggs, milk"])
        scene = SceneInput("s1", ImagePayload(b"jpeg-bytes"))
        result = run_pipeline(scene, provider, lexicon=load_lexicon())
        self.assertEqual(result.detected, ("milk", "eggs"))
        self.assertEqual(result.planned.items, ("eggs", "milk"))
        self.assertEqual(result.attempts, 1)
        self.assertEqual(len(result.transcripts), 2)
        self.assertIn("image", result.transcripts[0].to_document()["messages"][-1])

    def test_planning_only(self):
        provider = MockProvider.from_responses(["eggs, milk"])
        result = run_pipeline(SceneInput("s1", items=("Milk", "Eggs")), provider, detect=False)
        self.assertEqual(result.detected, ("milk", "eggs"))
        self.assertEqual(len(result.transcripts), 1)

    def test_exhaustion_carries_every_transcript(self):
        provider = MockProvider.from_responses(["milk, eggs", "x", "y", "z"])
        with self.assertRaises(ValidationExhaustedError) as ctx:
            run_pipeline(SceneInput("s9"), provider, lexicon=load_lexicon())
        self.assertEqual(len(ctx.exception.context["transcripts"]), 4)
        self.assertEqual(ctx.exception.context["scene_id"], "s9")

    def test_empty_detection_carries_the_perception_transcript(self):
        provider = MockProvider.from_responses([","])
        with self.assertRaises(EmptyDetectionError) as ctx:
            run_pipeline(SceneInput("s3"), provider, lexicon=load_lexicon())
        self.assertEqual(len(ctx.exception.context["transcripts"]), 1)
