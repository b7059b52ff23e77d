"""Tests for the kernel expression language, homogeneity check and catalog"""

from __future__ import annotations

import math

import numpy as np
import pytest

from errors import (InputError, KernelDomainError, KernelSyntaxError,
                    PreconditionError, UnknownIdentifierError)
from kernels import (BINARY_OPS, CATALOG, BinOp, Call, Const, Neg, Num, Var,
                     catalog, check_homogeneity, estimate_order, evaluate,
                     evaluate_array, make_kernel, parse_kernel, swap_variables,
                     to_text, transpose)


# ============================================================================
# Parsing
# ============================================================================

class TestParse:
    def test_hilbert_tree(self):
        assert parse_kernel("1/(r+s)") == BinOp("/", Num(1.0), BinOp("+", Var("r"), Var("s")))

    @pytest.mark.parametrize("text, r, s, expected", [
        ("1/(r+s)", 1.0, 1.0, 0.5),
        ("1/(r^2+s^2)", 1.0, 1.0, 0.5),
        ("1/max(r,s)", 2.0, 3.0, 1.0 / 3.0),
        ("exp(-r) * log(s)", 0.0, math.e, 1.0),
        ("2^3^2", 1.0, 1.0, 512.0),
        ("-2^2", 1.0, 1.0, -4.0),
        ("8/4/2", 1.0, 1.0, 1.0),
        ("r - s - 1", 5.0, 1.0, 3.0),
        ("r**2 * pi", 2.0, 1.0, 4.0 * math.pi),
        ("min(r, s) + step(r - s)", 2.0, 1.0, 2.0),
    ])
    def test_evaluation(self, text, r, s, expected):
        assert evaluate(parse_kernel(text), r, s) == pytest.approx(expected)

    def test_unary_minus_binds_looser_than_power(self):
        assert parse_kernel("-r^2") == Neg(BinOp("^", Var("r"), Num(2.0)))

    def test_negative_exponent(self):
        assert parse_kernel("r^-2") == BinOp("^", Var("r"), Neg(Num(2.0)))

    def test_syntax_error_offset_and_expected(self):
        with pytest.raises(KernelSyntaxError) as exc_info:
            parse_kernel("1/(r+)")
        assert exc_info.value.offset == 5
        assert "number" in exc_info.value.expected

    def test_unclosed_paren(self):
        with pytest.raises(KernelSyntaxError) as exc_info:
            parse_kernel("(r+s")
        assert exc_info.value.offset == 4
        assert "')'" in exc_info.value.expected

    def test_trailing_token(self):
        with pytest.raises(KernelSyntaxError, match="end of input"):
            parse_kernel("r s")

    def test_offset_is_in_bytes(self):
        with pytest.raises(KernelSyntaxError) as exc_info:
            parse_kernel("r + é")
        assert exc_info.value.offset == 4

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as exc_info:
            parse_kernel("r + x")
        assert exc_info.value.name == "x"
        assert exc_info.value.offset == 4

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifierError):
            parse_kernel("sin(r)")

    def test_wrong_arity(self):
        with pytest.raises(KernelSyntaxError, match="takes 2"):
            parse_kernel("max(r)")

    def test_empty(self):
        with pytest.raises(KernelSyntaxError):
            parse_kernel("   ")


def _random_tree(rng: np.random.Generator, depth: int):
    if depth == 0 or rng.random() < 0.25:
        choice = rng.integers(4)
        if choice == 0:
            return Num(float(rng.choice([0.5, 1.0, 2.0, 3.25, 1e-05, 12.0])))
        if choice == 1:
            return Const("pi")
        return Var("r" if choice == 2 else "s")
    kind = rng.integers(4)
    if kind == 0:
        return Neg(_random_tree(rng, depth - 1))
    if kind == 1:
        func = str(rng.choice(["exp", "log", "step"]))
        return Call(func, (_random_tree(rng, depth - 1),))
    if kind == 2:
        func = str(rng.choice(["min", "max"]))
        return Call(func, (_random_tree(rng, depth - 1), _random_tree(rng, depth - 1)))
    op = str(rng.choice(list(BINARY_OPS)))
    return BinOp(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))


class TestRoundTrip:
    def test_random_corpus(self):
        rng = np.random.default_rng(2024)
        for _ in range(1500):
            tree = _random_tree(rng, 5)
            text = to_text(tree)
            assert parse_kernel(text) == tree, text
            assert parse_kernel(to_text(parse_kernel(text))) == parse_kernel(text)

    def test_swap_variables(self):
        tree = parse_kernel("r^2/(r+s)")
        assert to_text(swap_variables(tree)) == to_text(parse_kernel("s^2/(s+r)"))
        assert swap_variables(swap_variables(tree)) == tree


# ============================================================================
# Evaluation
# ============================================================================

class TestEvaluate:
    def test_domain_error(self):
        with pytest.raises(KernelDomainError, match="undefined"):
            evaluate(parse_kernel("log(r - s)"), 1.0, 2.0)

    def test_division_by_zero(self):
        with pytest.raises(KernelDomainError):
            evaluate(parse_kernel("1/(r-s)"), 1.0, 1.0)

    def test_array_matches_scalar(self):
        tree = parse_kernel("exp(-r)*s^0.5/(1+max(r,s))")
        r = np.array([0.1, 1.0, 7.5])
        s = np.array([2.0, 0.3, 1.0])
        expected = [evaluate(tree, a, b) for a, b in zip(r, s)]
        assert evaluate_array(tree, r, s) == pytest.approx(expected, rel=1e-14)

    def test_array_domain_errors_become_nan(self):
        values = evaluate_array(parse_kernel("log(r - s)"), np.array([3.0, 1.0]), 2.0)
        assert values[0] == 0.0
        assert math.isnan(values[1])


# ============================================================================
# Homogeneity
# ============================================================================

class TestHomogeneity:
    def test_hilbert(self):
        report = check_homogeneity(catalog("hilbert"), -1.0)
        assert report.passed
        assert report.max_rel_dev <= 1e-12

    def test_mixed_scaling_fails(self):
        report = check_homogeneity(make_kernel("1/(r+s^2)"), -1.0)
        assert not report.passed
        assert report.offending is not None

    def test_hilbert_lambda_three(self):
        assert check_homogeneity(catalog("hilbert_lambda", lam=3.0), -3.0).passed

    def test_domain_error_is_a_failure(self):
        kernel = make_kernel("1/(r+s) + exp(log(1000 + r - s))")
        report = check_homogeneity(kernel, -1.0)
        assert not report.passed
        assert report.offending is not None

    def test_needs_enough_samples(self):
        with pytest.raises(InputError):
            check_homogeneity(catalog("hilbert"), -1.0, n_samples=10)

    def test_estimate_order(self):
        assert estimate_order(make_kernel("1/(r^2+s^2)")) == pytest.approx(-2.0, abs=1e-9)

    def test_make_kernel_with_order(self):
        kernel = make_kernel("1/(r^2+s^2)", order=-2)
        assert kernel.order == -2.0

    def test_make_kernel_wrong_order(self):
        with pytest.raises(PreconditionError, match="homogeneity"):
            make_kernel("1/(r+s^2)", order=-1)

    def test_negative_kernel_rejected(self):
        with pytest.raises(InputError, match="negative"):
            make_kernel("-1/(r+s)")

    def test_kernel_with_zeros_allowed(self):
        kernel = make_kernel("step(r-s)/r", order=-1)
        assert not kernel.positivity_checked

    def test_order_required(self):
        with pytest.raises(PreconditionError):
            make_kernel("1/(r+s)").order


# ============================================================================
# Catalog
# ============================================================================

class TestCatalog:
    def test_hilbert(self):
        assert catalog("hilbert")(1.0, 1.0) == 0.5

    def test_hilbert_lambda(self):
        assert catalog("hilbert_lambda", lam=2.0)(1.0, 2.0) == pytest.approx(0.2)

    def test_weighted_hilbert(self):
        assert catalog("weighted_hilbert", lam=1.0, p=2.0, k_exp=2.0)(1.0, 1.0) == pytest.approx(0.5)

    def test_max_kernel(self):
        assert catalog("max_kernel")(2.0, 3.0) == pytest.approx(1.0 / 3.0)

    def test_group_weighted_hilbert(self):
        kernel = catalog("group_weighted_hilbert", p=2.0, Q=4.0, c=0.5)
        assert kernel.order == -4.0
        assert kernel(1.0, 1.0) == pytest.approx(0.25)

    @pytest.mark.parametrize("name, params", [
        ("hilbert", {}),
        ("hilbert_lambda", {"lam": 0.5}),
        ("hilbert_lambda", {"lam": 4.0}),
        ("weighted_hilbert", {"lam": 2.0, "p": 3.0, "k_exp": 1.5}),
        ("max_kernel", {}),
        ("group_weighted_hilbert", {"p": 1.5, "Q": 3.0, "c": 2.0}),
        ("hardy_averaging", {}),
    ])
    def test_declared_order_holds(self, name, params):
        kernel = catalog(name, **params)
        assert check_homogeneity(kernel, kernel.order, tol=1e-10).passed

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
    @pytest.mark.parametrize("p", [1.25, 2.0, 5.0])
    @pytest.mark.parametrize("k_exp", [1.5, 2.0, 3.0])
    def test_weighted_hilbert_order_is_minus_one(self, lam, p, k_exp):
        kernel = catalog("weighted_hilbert", lam=lam, p=p, k_exp=k_exp)
        assert kernel.order == -1.0
        assert check_homogeneity(kernel, -1.0).passed

    @pytest.mark.parametrize("name, params", [
        ("hilbert_lambda", {"lam": 0.0}),
        ("weighted_hilbert", {"lam": 1.0, "p": 1.0, "k_exp": 2.0}),
        ("group_weighted_hilbert", {"p": 0.5, "Q": 2.0, "c": 1.0}),
        ("hilbert", {"lam": 2.0}),
        ("hilbert_lambda", {}),
    ])
    def test_invalid_parameters(self, name, params):
        with pytest.raises(InputError):
            catalog(name, **params)

    def test_unknown_name(self):
        with pytest.raises(InputError, match="Known"):
            catalog("poisson")

    def test_every_entry_is_described(self):
        assert all(entry.description for entry in CATALOG.values())

    def test_transpose(self):
        kernel = catalog("group_weighted_hilbert", p=3.0, Q=2.0, c=1.0)
        kt = transpose(kernel)
        assert kt(2.0, 5.0) == pytest.approx(kernel(5.0, 2.0))
        assert kt.order == kernel.order
        assert transpose(kt).name == kernel.name
