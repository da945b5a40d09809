import random
from itertools import product

from django.test import SimpleTestCase, tag

from wisemove.exceptions import LtlSyntaxError, MissingAtomError, UnknownCharacterError
from wisemove.ltl import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Implies,
    Next,
    Not,
    Or,
    Until,
    Verdict,
    evaluate_trace,
    finalize,
    locate_violation,
    monitor_step,
    new_monitor,
    parse,
    progress,
    to_string,
)
from wisemove.options import EPISODE_RULES, PRECONDITIONS, TRAINING_MONITORS

from .oracle import formulas, holds, oracle_verdict, valuations

a, b = Atom("a"), Atom("b")

STOP_RULE = "G(in_stop_region => (in_stop_region U has_stopped_in_stop_region))"


class ParseTestCase(SimpleTestCase):

    def test_single_atom(self):
        self.assertEqual(parse("a"), a)

    def test_stop_region_rule(self):
        """Test the stop-region rule parses into the expected tree"""
        f = parse(STOP_RULE)
        self.assertEqual(
            f,
            Always(Implies(Atom("in_stop_region"), Until(Atom("in_stop_region"), Atom("has_stopped_in_stop_region")))),
        )

    def test_unary_binds_tighter_than_until(self):
        self.assertEqual(parse("not a U b"), Until(Not(a), b))

    def test_negated_parenthesised_disjunction(self):
        f = parse("G(not(in_intersection or in_stop_region))")
        self.assertEqual(f, Always(Not(Or(Atom("in_intersection"), Atom("in_stop_region")))))

    def test_precedence_and_associativity(self):
        self.assertEqual(parse("a and b or a"), Or(And(a, b), a))
        self.assertEqual(parse("a or b and a"), Or(a, And(b, a)))
        self.assertEqual(parse("a U b U a"), Until(a, Until(b, a)))
        self.assertEqual(parse("a => b => a"), Implies(a, Implies(b, a)))
        self.assertEqual(parse("a or b U a => b"), Implies(Until(Or(a, b), a), b))
        self.assertEqual(parse("X F G a"), Next(Eventually(Always(a))))

    def test_constants_are_keywords(self):
        self.assertEqual(parse("true and false"), And(TRUE, FALSE))

    def test_round_trip_on_rule_corpus(self):
        """Test printing then re-parsing every rule the planner uses gives the same tree"""
        corpus = list(EPISODE_RULES.values()) + list(PRECONDITIONS.values())
        corpus += [f for monitors in TRAINING_MONITORS.values() for _, f in monitors]
        corpus += [parse(text) for text in ("not a U b", "(a U b) U a", "not (a => b)", "X(a and (b or a))")]
        for f in corpus:
            with self.subTest(formula=to_string(f)):
                self.assertEqual(parse(to_string(f)), f)

    def test_round_trip_on_generated_formulas(self):
        for f in formulas(3)[::7]:
            self.assertEqual(parse(to_string(f)), f)

    def test_unknown_character(self):
        with self.assertRaises(UnknownCharacterError) as ctx:
            parse("a & b")
        self.assertEqual(ctx.exception.offset, 2)
        self.assertEqual(ctx.exception.char, "&")

    def test_syntax_error_reports_offset_and_expected_tokens(self):
        with self.assertRaises(LtlSyntaxError) as ctx:
            parse("G(a and )")
        self.assertEqual(ctx.exception.offset, 8)
        self.assertIn("identifier", ctx.exception.expected)

    def test_unbalanced_parenthesis(self):
        with self.assertRaises(LtlSyntaxError) as ctx:
            parse("(a or b")
        self.assertIn(")", ctx.exception.expected)

    def test_trailing_input(self):
        with self.assertRaises(LtlSyntaxError):
            parse("a b")

    def test_offsets_are_in_bytes(self):
        with self.assertRaises(UnknownCharacterError) as ctx:
            parse("é a")
        self.assertEqual(ctx.exception.offset, 0)
        with self.assertRaises(UnknownCharacterError) as ctx:
            parse("a or é")
        self.assertEqual(ctx.exception.offset, 5)


class ProgressTestCase(SimpleTestCase):

    def test_always_survives_a_true_step(self):
        self.assertEqual(progress(Always(a), {"a": True}), Always(a))

    def test_always_falsified(self):
        self.assertEqual(progress(Always(a), {"a": False}), FALSE)

    def test_until_pending(self):
        self.assertEqual(progress(Until(a, b), {"a": True, "b": False}), Until(a, b))

    def test_until_released(self):
        self.assertEqual(progress(Until(a, b), {"a": False, "b": True}), TRUE)

    def test_next_unwraps(self):
        self.assertEqual(progress(Next(And(a, b)), {"a": False, "b": False}), And(a, b))

    def test_missing_atom_names_identifier(self):
        with self.assertRaises(MissingAtomError) as ctx:
            progress(And(a, b), {"a": True})
        self.assertEqual(ctx.exception.name, "b")
        self.assertIsInstance(ctx.exception, KeyError)

    def test_conjunctions_are_deduplicated(self):
        f = Always(Implies(a, Eventually(b)))
        residual = f
        for _ in range(20):
            residual = progress(residual, {"a": True, "b": False})
        self.assertLessEqual(len(to_string(residual)), 3 * len(to_string(f)))

    def test_complement_annihilation_is_opt_in(self):
        f = And(Next(a), Next(Not(a)))
        v = {"a": True}
        self.assertEqual(progress(f, v), And(a, Not(a)))
        self.assertEqual(progress(f, v, annihilate=True), FALSE)

    def test_simplification_preserves_semantics(self):
        """Test simplified and raw residuals score the same on every short extension"""
        rng = random.Random(7)
        pool = formulas(3)
        steps = valuations()
        for _ in range(150):
            f = rng.choice(pool)
            v = rng.choice(steps)
            simplified, raw = progress(f, v), progress(f, v, simplified=False)
            for length in range(1, 4):
                for extension in product(steps, repeat=length):
                    self.assertEqual(holds(simplified, list(extension)), holds(raw, list(extension)), (f, v, extension))


class MonitorTestCase(SimpleTestCase):

    def test_intersection_rule_violated(self):
        m = new_monitor("G(in_intersection => intersection_is_clear)")
        _, verdict = monitor_step(m, {"in_intersection": True, "intersection_is_clear": False})
        self.assertEqual(verdict, Verdict.VIOLATED)

    def test_safety_never_satisfied_on_a_prefix(self):
        m = new_monitor(Always(a))
        for _ in range(100):
            m, verdict = monitor_step(m, {"a": True})
            self.assertEqual(verdict, Verdict.UNDETERMINED)
        self.assertEqual(m.steps_consumed, 100)

    def test_conclusive_verdicts_are_absorbing(self):
        m = new_monitor(Always(a))
        m, verdict = monitor_step(m, {"a": False})
        self.assertEqual(verdict, Verdict.VIOLATED)
        for v in valuations():
            m, verdict = monitor_step(m, v)
            self.assertEqual(verdict, Verdict.VIOLATED)
        m = new_monitor(Eventually(a))
        m, verdict = monitor_step(m, {"a": True})
        self.assertEqual(verdict, Verdict.SATISFIED)
        m, verdict = monitor_step(m, {"a": False})
        self.assertEqual(verdict, Verdict.SATISFIED)

    def test_residual_matches_repeated_progress(self):
        f = parse("G(a => (a U b))")
        trace = [{"a": True, "b": False}, {"a": True, "b": True}, {"a": False, "b": False}]
        m = new_monitor(f)
        residual = f
        for v in trace:
            m, _ = monitor_step(m, v)
            residual = progress(residual, v)
            self.assertEqual(m.residual, residual)

    def test_finalize(self):
        self.assertEqual(finalize(new_monitor(FALSE)), Verdict.VIOLATED)
        self.assertEqual(finalize(new_monitor(TRUE)), Verdict.SATISFIED)
        m, _ = monitor_step(new_monitor(Eventually(a)), {"a": False})
        self.assertEqual(finalize(m), Verdict.UNDETERMINED)

    def test_stop_rule_on_rolling_stop(self):
        """Test entering and leaving the stop region without stopping violates the stop rule"""
        def v(in_region, stopped):
            return {"in_stop_region": in_region, "has_stopped_in_stop_region": stopped}

        trace = [v(False, False), v(True, False), v(True, False), v(False, False)]
        self.assertEqual(evaluate_trace(STOP_RULE, trace), Verdict.VIOLATED)
        self.assertEqual(oracle_verdict(parse(STOP_RULE), trace), Verdict.VIOLATED)
        self.assertEqual(locate_violation(STOP_RULE, trace), (Verdict.VIOLATED, 3))

    def test_evaluate_trace_examples(self):
        self.assertEqual(evaluate_trace(Always(a), [{"a": True}] * 4), Verdict.UNDETERMINED)
        self.assertEqual(evaluate_trace(a, [{"a": True}]), Verdict.SATISFIED)
        self.assertEqual(locate_violation(Always(a), [{"a": True}] * 3), (Verdict.UNDETERMINED, None))

    def test_batching_invariance(self):
        rng = random.Random(3)
        for f in formulas(2):
            trace = [rng.choice(valuations()) for _ in range(5)]
            m = new_monitor(f)
            for n, v in enumerate(trace, start=1):
                m, _ = monitor_step(m, v)
                self.assertEqual(finalize(m), evaluate_trace(f, trace[:n]))


class OracleEquivalenceTestCase(SimpleTestCase):
    """Monitor verdicts against brute-force Kleene evaluation, prefix by prefix"""

    def _sweep(self, pool, length):
        steps = valuations()
        mismatches = []

        def walk(f, m, prefix):
            for v in steps:
                nxt, verdict = monitor_step(m, v)
                extended = prefix + [v]
                expected = oracle_verdict(f, extended)
                if verdict != expected:
                    mismatches.append((to_string(f), extended, verdict, expected))
                if len(extended) < length:
                    walk(f, nxt, extended)

        for f in pool:
            walk(f, new_monitor(f), [])
        return mismatches

    def test_depth_two_formulas(self):
        self.assertEqual(self._sweep(formulas(2), 5), [])

    @tag("slow")
    def test_depth_three_formulas(self):
        pool = formulas(3)
        self.assertEqual(len(pool), 2810)
        self.assertEqual(self._sweep(pool, 5), [])
