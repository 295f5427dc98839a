import math
from itertools import permutations

import numpy as np
from django.test import SimpleTestCase

from packing.catalog import ClassCatalog
from packing.exceptions import AggregationError, LabelError, ScoringError
from packing.preference import PreferenceMatrix, load_matrix
from packing.scoring import (
    NEG_INF,
    ConsistencyScore,
    PackingSequence,
    average_score,
    constraint_satisfaction_rate,
    decode_extended,
    encode_extended,
    format_score,
    score,
)

from .factories import FIXTURES, random_matrix

GROCERY_OPTIMUM = ("bottle", "apples", "bell pepper", "bananas")


def oracle_score(items, m):
    """Independent pair enumeration straight off the matrix."""
    index = {c: i for i, c in enumerate(m.classes)}
    total = 0.0
    for p in range(len(items)):
        for q in range(p + 1, len(items)):
            a, b = index[items[p]], index[items[q]]
            if a == b:
                continue
            prob = m.prob[a, b]
            if prob == 0.0:
                return NEG_INF
            total += math.log(prob)
    return total


class PackingSequenceTests(SimpleTestCase):
    def test_labels_are_normalized(self):
        s = PackingSequence.parse(" Bottle ,apples,, BANANAS ")
        self.assertEqual(s.items, ("bottle", "apples", "bananas"))
        self.assertEqual(str(s), "bottle, apples, bananas")

    def test_top_first_is_reversed(self):
        s = PackingSequence.from_labels(["bananas", "bottle"], top_first=True)
        self.assertEqual(s.items, ("bottle", "bananas"))

    def test_empty_sequence_is_rejected(self):
        with self.assertRaises(LabelError):
            PackingSequence(())


class ScoreTests(SimpleTestCase):
    def setUp(self):
        self.table = load_matrix(FIXTURES / "grocery_matrix.json")

    def test_table_example(self):
        result = score(PackingSequence(GROCERY_OPTIMUM), self.table)
        expected = math.log(0.857 * 0.964 * 0.714 * 0.892 * 0.714)
        self.assertAlmostEqual(result.value, expected, places=12)
        self.assertAlmostEqual(result.value, -0.978, delta=0.05)
        self.assertEqual(len(result.pair_terms), 6)

    def test_single_item_scores_zero(self):
        self.assertEqual(score(PackingSequence(("bottle",)), self.table).value, 0.0)

    def test_same_class_pairs_contribute_nothing(self):
        with_repeat = score(PackingSequence(("bottle", "bottle", "apples")), self.table)
        self.assertEqual(with_repeat.value, 0.0)
        self.assertEqual(len(with_repeat.pair_terms), 2)

    def test_zero_probability_pair_is_negative_infinity(self):
        result = score(PackingSequence(("apples", "bottle")), self.table)
        self.assertEqual(result.value, NEG_INF)
        self.assertTrue(result.is_infinite)
        self.assertEqual(result.zero_pairs, 1)

    def test_unknown_label_is_named(self):
        with self.assertRaises(ScoringError) as ctx:
            score(PackingSequence(("bottle", "dragonfruit")), self.table)
        self.assertEqual(ctx.exception.label, "dragonfruit")

    def test_plural_and_qualifier_labels_resolve(self):
        a = score(PackingSequence(("bottle (1l)", "apple", "banana")), self.table)
        b = score(PackingSequence(("bottle", "apples", "bananas")), self.table)
        self.assertEqual(a.value, b.value)

    def test_matches_pair_enumeration_oracle(self):
        rng = np.random.default_rng(20240611)
        for _ in range(500):
            n = int(rng.integers(2, 9))
            m = random_matrix(rng, n)
            length = int(rng.integers(1, 11))
            items = [m.classes[i] for i in rng.integers(0, n, size=length)]
            got = score(PackingSequence(tuple(items)), m).value
            expected = oracle_score(items, m)
            if expected == NEG_INF:
                self.assertEqual(got, NEG_INF)
            else:
                self.assertAlmostEqual(got, expected, delta=1e-12)

    def test_adjacent_swap_changes_one_term(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(2, 11))
            m = random_matrix(rng, n, zero_rate=0.0)
            order = [m.classes[i] for i in rng.permutation(n)]
            j = int(rng.integers(0, n - 1))
            swapped = list(order)
            swapped[j], swapped[j + 1] = swapped[j + 1], swapped[j]
            delta = score(PackingSequence(tuple(swapped)), m).value - score(PackingSequence(tuple(order)), m).value
            a, b = order[j], order[j + 1]
            expected = math.log(m.probability(b, a)) - math.log(m.probability(a, b))
            self.assertAlmostEqual(delta, expected, delta=1e-10)

    def test_relabeling_the_catalog_keeps_the_score(self):
        rng = np.random.default_rng(303)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            m = random_matrix(rng, n)
            perm = rng.permutation(n)
            names = tuple(f"renamed {j:02d}" for j in range(n))
            renamed = PreferenceMatrix(
                ClassCatalog(names),
                m.prob[np.ix_(perm, perm)],
                m.count[np.ix_(perm, perm)],
                m.observed[np.ix_(perm, perm)],
            )
            mapping = {m.classes[perm[j]]: names[j] for j in range(n)}
            items = [m.classes[i] for i in rng.integers(0, n, size=int(rng.integers(1, 9)))]
            before = score(PackingSequence(tuple(items)), m).value
            after = score(PackingSequence(tuple(mapping[i] for i in items)), renamed).value
            if before == NEG_INF:
                self.assertEqual(after, NEG_INF)
            else:
                self.assertAlmostEqual(after, before, delta=1e-12)

    def test_uninformative_matrix_scores_every_order_alike(self):
        m = random_matrix(np.random.default_rng(0), 6, zero_rate=0.0, unobserved_rate=1.0)
        for length in range(1, 7):
            expected = length * (length - 1) / 2 * math.log(0.5)
            for order in permutations(m.classes[:length]):
                self.assertAlmostEqual(score(PackingSequence(order), m).value, expected, places=12)

    def test_reversal_of_pair(self):
        forward = score(PackingSequence(("bottle", "bananas")), self.table).value
        backward = score(PackingSequence(("bananas", "bottle")), self.table).value
        self.assertAlmostEqual(forward, math.log(0.964), places=12)
        self.assertAlmostEqual(backward, math.log(0.035), places=12)


class AverageScoreTests(SimpleTestCase):
    def test_mean(self):
        result = average_score([ConsistencyScore(-1.0), ConsistencyScore(-3.0)])
        self.assertEqual(result.value, -2.0)
        self.assertEqual(result.infinite_count, 0)

    def test_any_negative_infinity_dominates(self):
        result = average_score([ConsistencyScore(-1.0), ConsistencyScore(NEG_INF), -2.0])
        self.assertEqual(result.value, NEG_INF)
        self.assertEqual(result.infinite_count, 1)
        self.assertEqual(result.count, 3)

    def test_empty_list(self):
        with self.assertRaises(AggregationError):
            average_score([])


class SatisfactionRateTests(SimpleTestCase):
    def setUp(self):
        self.table = load_matrix(FIXTURES / "grocery_matrix.json")

    def test_optimum_satisfies_every_pair(self):
        self.assertEqual(constraint_satisfaction_rate(PackingSequence(GROCERY_OPTIMUM), self.table), 1.0)

    def test_reversed_optimum_satisfies_none(self):
        reversed_order = PackingSequence(tuple(reversed(GROCERY_OPTIMUM)))
        self.assertEqual(constraint_satisfaction_rate(reversed_order, self.table), 0.0)

    def test_half_probability_counts_as_satisfied(self):
        rng = np.random.default_rng(1)
        m = random_matrix(rng, 3, zero_rate=0.0, unobserved_rate=1.0)
        self.assertEqual(constraint_satisfaction_rate(PackingSequence(m.classes), m), 1.0)

    def test_undefined_cases(self):
        with self.assertRaises(ScoringError):
            constraint_satisfaction_rate(PackingSequence(("bottle",)), self.table)
        with self.assertRaises(ScoringError):
            constraint_satisfaction_rate(PackingSequence(("bottle", "bottle")), self.table)

    def test_rate_is_a_fraction(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            m = random_matrix(rng, 6)
            order = PackingSequence(tuple(m.classes[i] for i in rng.permutation(6)))
            rate = constraint_satisfaction_rate(order, m)
            self.assertGreaterEqual(rate, 0.0)
            self.assertLessEqual(rate, 1.0)
            self.assertAlmostEqual(rate * 15, round(rate * 15), places=9)


class ExtendedRealTests(SimpleTestCase):
    def test_negative_infinity_is_a_string_in_documents(self):
        self.assertEqual(encode_extended(NEG_INF), "-inf")
        self.assertEqual(decode_extended("-inf"), NEG_INF)
        self.assertEqual(encode_extended(-1.5), -1.5)
        self.assertIsNone(encode_extended(None))

    def test_format(self):
        self.assertEqual(format_score(NEG_INF), "-inf")
        self.assertEqual(format_score(None), "n/a")
        self.assertEqual(format_score(-0.97912), "-0.9791")
