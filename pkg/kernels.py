"""Bivariate kernels k(r, s) on (0, inf)^2.

Kernels are written in a small expression language:

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          (right associative; '**' is accepted)
    atom  := NUMBER | 'r' | 's' | 'pi' | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

with FUNC one of exp, log, min, max, step. Parsing is precedence climbing
over the binary operator table below.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Union

import numpy as np

from errors import (InputError, KernelDomainError, KernelSyntaxError,
                    PreconditionError, UnknownIdentifierError)
from hh_config import CheckDefaults
from logger import get_logger

logger = get_logger("kernels")


# ============================================================================
# Expression tree
# ============================================================================

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Node, ...]


Node = Union[Num, Var, Const, Neg, BinOp, Call]

CONSTANTS: dict[str, float] = {"pi": math.pi}


def _step(x: float) -> float:
    return 1.0 if x > 0 else 0.0


# name -> (arity, scalar implementation, array implementation)
FUNCTIONS: dict[str, tuple[int, Callable[..., float], Callable[..., np.ndarray]]] = {
    "exp": (1, math.exp, np.exp),
    "log": (1, math.log, np.log),
    "min": (2, min, np.minimum),
    "max": (2, max, np.maximum),
    "step": (1, _step, lambda x: np.heaviside(x, 0.0)),
}

# Binary operators: precedence and associativity. Unary minus sits at 3.
BINARY_OPS: dict[str, tuple[int, str]] = {
    "+": (1, "left"),
    "-": (1, "left"),
    "*": (2, "left"),
    "/": (2, "left"),
    "^": (4, "right"),
}
UNARY_PREC = 3
ATOM_PREC = 5


# ============================================================================
# Tokenizer
# ============================================================================

@dataclass(frozen=True)
class Token:
    kind: str      # NUMBER, IDENT, OP, LPAREN, RPAREN, COMMA, EOF
    text: str
    offset: int    # byte offset into the UTF-8 source


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^])"
    r"|(?P<lparen>\()|(?P<rparen>\))|(?P<comma>,)"
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        offset = len(text[:pos].encode("utf-8"))
        if m is None:
            raise KernelSyntaxError(f"unexpected character {text[pos]!r}", offset)
        kind = m.lastgroup
        if kind != "ws":
            lexeme = m.group()
            if kind == "op" and lexeme == "**":
                lexeme = "^"
            tokens.append(Token(kind.upper(), lexeme, offset))
        pos = m.end()
    tokens.append(Token("EOF", "", len(text.encode("utf-8"))))
    return tokens


# ============================================================================
# Parser
# ============================================================================

_OPERAND_START = ("number", "identifier", "'('", "'-'")


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.variables = variables

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise KernelSyntaxError(f"unexpected {_describe(tok)}", tok.offset, (what,))
        return self.advance()

    def parse(self) -> Node:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "EOF":
            expected = tuple(f"'{op}'" for op in BINARY_OPS) + ("end of input",)
            raise KernelSyntaxError(f"unexpected {_describe(tok)}", tok.offset, expected)
        return node

    def expression(self, min_prec: int) -> Node:
        lhs = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "OP" or tok.text not in BINARY_OPS:
                return lhs
            prec, assoc = BINARY_OPS[tok.text]
            if prec < min_prec:
                return lhs
            self.advance()
            if tok.text == "^":
                # exponent is a unary expression
                rhs = self.expression(UNARY_PREC)
            else:
                rhs = self.expression(prec + 1 if assoc == "left" else prec)
            lhs = BinOp(tok.text, lhs, rhs)

    def prefix(self) -> Node:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            return Neg(self.expression(UNARY_PREC))
        return self.atom()

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "NUMBER":
            return Num(float(tok.text))
        if tok.kind == "LPAREN":
            node = self.expression(0)
            self.expect("RPAREN", "')'")
            return node
        if tok.kind == "IDENT":
            if self.peek().kind == "LPAREN":
                return self.call(tok)
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in CONSTANTS:
                return Const(tok.text)
            raise UnknownIdentifierError(tok.text, tok.offset)
        raise KernelSyntaxError(f"unexpected {_describe(tok)}", tok.offset, _OPERAND_START)

    def call(self, name: Token) -> Node:
        if name.text not in FUNCTIONS:
            raise UnknownIdentifierError(name.text, name.offset)
        arity = FUNCTIONS[name.text][0]
        self.advance()  # '('
        args = [self.expression(0)]
        while self.peek().kind == "COMMA":
            self.advance()
            args.append(self.expression(0))
        close = self.peek()
        if close.kind != "RPAREN":
            raise KernelSyntaxError(f"unexpected {_describe(close)}", close.offset, ("','", "')'"))
        if len(args) != arity:
            raise KernelSyntaxError(
                f"{name.text}() takes {arity} argument(s), got {len(args)}",
                close.offset, ("')'",) if len(args) < arity else ("','",))
        self.advance()
        return Call(name.text, tuple(args))


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "EOF" else f"'{tok.text}'"


def parse_kernel(text: str, variables: tuple[str, ...] = ("r", "s")) -> Node:
    """
    Parse kernel text into an expression tree.

    Raises:
        KernelSyntaxError: malformed text (carries byte offset and expected tokens)
        UnknownIdentifierError: name outside the variables, constants and functions
    """
    if not text or not text.strip():
        raise KernelSyntaxError("empty expression", 0, _OPERAND_START)
    return _Parser(text, variables).parse()


# ============================================================================
# Printer
# ============================================================================

def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return BINARY_OPS[node.op][0]
    if isinstance(node, Neg):
        return UNARY_PREC
    return ATOM_PREC


def _wrap(node: Node, needed: int) -> str:
    text = to_text(node)
    return text if _prec(node) >= needed else f"({text})"


def to_text(node: Node) -> str:
    """Print with the minimum parentheses that re-parse to the same tree"""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, UNARY_PREC)
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    prec = BINARY_OPS[node.op][0]
    if node.op == "^":
        return f"{_wrap(node.left, prec + 1)}^{_wrap(node.right, UNARY_PREC)}"
    return f"{_wrap(node.left, prec)} {node.op} {_wrap(node.right, prec + 1)}"


def variables_of(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables_of(node.operand)
    if isinstance(node, BinOp):
        return variables_of(node.left) | variables_of(node.right)
    if isinstance(node, Call):
        return set().union(*(variables_of(a) for a in node.args))
    return set()


def swap_variables(node: Node) -> Node:
    """Exchange r and s throughout the tree"""
    if isinstance(node, Var):
        return Var({"r": "s", "s": "r"}.get(node.name, node.name))
    if isinstance(node, Neg):
        return Neg(swap_variables(node.operand))
    if isinstance(node, BinOp):
        return BinOp(node.op, swap_variables(node.left), swap_variables(node.right))
    if isinstance(node, Call):
        return Call(node.func, tuple(swap_variables(a) for a in node.args))
    return node


# ============================================================================
# Evaluation
# ============================================================================

Compiled = Callable[[float, float], float]


def compile_expr(node: Node) -> Compiled:
    """Compile a tree to a closure f(r, s) using math functions"""
    if isinstance(node, Num):
        v = node.value
        return lambda r, s: v
    if isinstance(node, Const):
        v = CONSTANTS[node.name]
        return lambda r, s: v
    if isinstance(node, Var):
        return (lambda r, s: r) if node.name == "r" else (lambda r, s: s)
    if isinstance(node, Neg):
        inner = compile_expr(node.operand)
        return lambda r, s: -inner(r, s)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func][1]
        args = [compile_expr(a) for a in node.args]
        if len(args) == 1:
            a0 = args[0]
            return lambda r, s: fn(a0(r, s))
        a0, a1 = args
        return lambda r, s: fn(a0(r, s), a1(r, s))
    a, b = compile_expr(node.left), compile_expr(node.right)
    if node.op == "+":
        return lambda r, s: a(r, s) + b(r, s)
    if node.op == "-":
        return lambda r, s: a(r, s) - b(r, s)
    if node.op == "*":
        return lambda r, s: a(r, s) * b(r, s)
    if node.op == "/":
        return lambda r, s: a(r, s) / b(r, s)
    return lambda r, s: math.pow(a(r, s), b(r, s))


def compile_guarded(node: Node) -> Compiled:
    """compile_expr with math errors mapped to KernelDomainError"""
    return _guarded(compile_expr(node), node)


def evaluate(node: Node, r: float, s: float = 1.0) -> float:
    """Evaluate once; raises KernelDomainError outside the real domain"""
    return compile_guarded(node)(r, s)


def _guarded(fn: Compiled, node: Node) -> Compiled:
    def run(r: float, s: float) -> float:
        try:
            return fn(r, s)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise KernelDomainError(
                f"{to_text(node)} undefined at r={r!r}, s={s!r}: {exc}") from None
    return run


def evaluate_array(node: Node, r: np.ndarray, s: np.ndarray | float = 1.0) -> np.ndarray:
    """Vectorized evaluation; domain errors come back as nan/inf"""
    r = np.asarray(r, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), r.shape)
    with np.errstate(all="ignore"):
        return np.broadcast_to(_eval_array(node, r, s), r.shape).astype(float)


def _eval_array(node: Node, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(r.shape, node.value)
    if isinstance(node, Const):
        return np.full(r.shape, CONSTANTS[node.name])
    if isinstance(node, Var):
        return r if node.name == "r" else s
    if isinstance(node, Neg):
        return -_eval_array(node.operand, r, s)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func][2]
        return fn(*(_eval_array(a, r, s) for a in node.args))
    a, b = _eval_array(node.left, r, s), _eval_array(node.right, r, s)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


# ============================================================================
# Kernels
# ============================================================================

@dataclass(frozen=True)
class Kernel:
    """A parsed kernel, optionally with a verified homogeneity order"""
    expr: Node
    claimed_order: float | None = None
    positivity_checked: bool = False
    name: str = "custom"
    params: tuple[tuple[str, float], ...] = field(default=())

    @cached_property
    def _fn(self) -> Compiled:
        return compile_guarded(self.expr)

    def __call__(self, r: float, s: float) -> float:
        return self._fn(r, s)

    def evaluate_array(self, r: np.ndarray, s: np.ndarray | float) -> np.ndarray:
        return evaluate_array(self.expr, r, s)

    @property
    def text(self) -> str:
        return to_text(self.expr)

    @property
    def order(self) -> float:
        if self.claimed_order is None:
            raise PreconditionError(f"kernel {self.text} has no verified homogeneity order")
        return self.claimed_order

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "expr": self.text,
            "order": self.claimed_order,
            "params": dict(self.params),
            "positivity_checked": self.positivity_checked,
        }


@dataclass(frozen=True)
class HomogeneityReport:
    passed: bool
    order: float
    max_rel_dev: float
    n_samples: int
    offending: tuple[float, float, float] | None = None   # (r, s, a)
    error: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "pass": self.passed,
            "order": self.order,
            "max_rel_dev": self.max_rel_dev if math.isfinite(self.max_rel_dev) else "inf",
            "n_samples": self.n_samples,
            "offending": list(self.offending) if self.offending else None,
            "error": self.error,
        }


def _log_uniform(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    return 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), n)


def check_homogeneity(kernel: Kernel, order: float,
                      n_samples: int = CheckDefaults.HOMOGENEITY_SAMPLES,
                      tol: float = CheckDefaults.HOMOGENEITY_TOL,
                      seed: int = CheckDefaults.HOMOGENEITY_SEED) -> HomogeneityReport:
    """
    Randomized check of k(a r, a s) = a^order k(r, s).

    (r, s) are log-uniform in [1e-3, 1e3]^2 and a log-uniform in [1e-2, 1e2].
    A domain error at a sample fails the check and names the point.
    """
    if n_samples < 100:
        raise InputError(f"n_samples must be >= 100, got {n_samples}")
    rng = np.random.default_rng(seed)
    rs = _log_uniform(rng, 1e-3, 1e3, n_samples)
    ss = _log_uniform(rng, 1e-3, 1e3, n_samples)
    scales = _log_uniform(rng, 1e-2, 1e2, n_samples)

    worst = 0.0
    worst_point: tuple[float, float, float] | None = None
    for r, s, a in zip(rs.tolist(), ss.tolist(), scales.tolist()):
        try:
            expected = a ** order * kernel(r, s)
            got = kernel(a * r, a * s)
        except KernelDomainError as exc:
            logger.warning(f"homogeneity check hit a domain error: {exc}")
            return HomogeneityReport(False, order, math.inf, n_samples, (r, s, a), str(exc))
        if expected == 0:
            dev = 0.0 if got == 0 else math.inf
        else:
            dev = abs(got - expected) / abs(expected)
        if dev > worst:
            worst, worst_point = dev, (r, s, a)

    passed = worst <= tol
    if not passed:
        logger.info(f"kernel {kernel.text} is not homogeneous of order {order:g} "
                    f"(max deviation {worst:.3g})")
    return HomogeneityReport(passed, order, worst, n_samples,
                             None if passed else worst_point)


def estimate_order(kernel: Kernel, n_samples: int = CheckDefaults.HOMOGENEITY_SAMPLES,
                   seed: int = CheckDefaults.HOMOGENEITY_SEED) -> float:
    """Least-squares order fit of log(k(ar, as) / k(r, s)) against log a"""
    rng = np.random.default_rng(seed)
    rs = _log_uniform(rng, 1e-3, 1e3, n_samples)
    ss = _log_uniform(rng, 1e-3, 1e3, n_samples)
    scales = _log_uniform(rng, 1e-2, 1e2, n_samples)
    base = kernel.evaluate_array(rs, ss)
    moved = kernel.evaluate_array(scales * rs, scales * ss)
    ok = np.isfinite(base) & np.isfinite(moved) & (base > 0) & (moved > 0)
    if not ok.any():
        return math.nan
    x = np.log(scales[ok])
    y = np.log(moved[ok] / base[ok])
    return float(np.dot(x, y) / np.dot(x, x))


def _check_nonnegative(node: Node, n_samples: int = 100,
                       seed: int = CheckDefaults.HOMOGENEITY_SEED) -> bool:
    """True if strictly positive at every sample; raises if any sample is negative"""
    rng = np.random.default_rng(seed)
    fn = compile_guarded(node)
    positive = True
    for r, s in zip(_log_uniform(rng, 1e-3, 1e3, n_samples).tolist(),
                    _log_uniform(rng, 1e-3, 1e3, n_samples).tolist()):
        v = fn(r, s)
        if v < 0:
            raise InputError(f"kernel {to_text(node)} is negative at r={r!r}, s={s!r}")
        positive = positive and v > 0
    return positive


def make_kernel(text: str, order: float | None = None, name: str = "custom",
                params: dict[str, float] | None = None) -> Kernel:
    """
    Parse text into a Kernel.

    When an order is given the homogeneity check must pass, otherwise a
    PreconditionError is raised.
    """
    expr = parse_kernel(text)
    positive = _check_nonnegative(expr)
    kernel = Kernel(expr, None, positive, name, tuple(sorted((params or {}).items())))
    if order is None:
        return kernel
    report = check_homogeneity(kernel, float(order))
    if not report.passed:
        raise PreconditionError(
            f"kernel {kernel.text} failed the homogeneity check at order {order} "
            f"(max deviation {report.max_rel_dev:.3g}, estimated order "
            f"{estimate_order(kernel):.6g})")
    return replace(kernel, claimed_order=float(order))


def transpose(kernel: Kernel) -> Kernel:
    """k^T(r, s) = k(s, r); same order"""
    name = kernel.name[:-2] if kernel.name.endswith("^T") else f"{kernel.name}^T"
    return replace(kernel, expr=swap_variables(kernel.expr), name=name)


# ============================================================================
# Catalog
# ============================================================================

def _conjugate(x: float) -> float:
    return x / (x - 1.0)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InputError(message)


def _hilbert() -> tuple[str, float]:
    return "1/(r+s)", -1.0


def _hilbert_lambda(lam: float) -> tuple[str, float]:
    _require(lam > 0, f"lambda must be positive, got {lam}")
    return f"1/(r^({lam!r})+s^({lam!r}))", -lam


def _weighted_hilbert(lam: float, p: float, k_exp: float) -> tuple[str, float]:
    # Operator orientation: the L^p function sits in the s slot
    _require(lam > 0, f"lambda must be positive, got {lam}")
    _require(p > 1, f"p must be > 1, got {p}")
    _require(k_exp > 1, f"k_exp must be > 1, got {k_exp}")
    q, m = _conjugate(p), _conjugate(k_exp)
    r_exp = -1.0 + lam / m + 1.0 / q
    s_exp = -1.0 + lam / k_exp + 1.0 / p
    return f"r^({r_exp!r})*s^({s_exp!r})/(r^({lam!r})+s^({lam!r}))", -1.0


def _max_kernel() -> tuple[str, float]:
    return "1/max(r,s)", -1.0


def _group_weighted_hilbert(p: float, Q: float, c: float) -> tuple[str, float]:
    _require(p > 1, f"p must be > 1, got {p}")
    _require(Q > 0, f"Q must be positive, got {Q}")
    _require(c > 0, f"c must be positive, got {c}")
    q = _conjugate(p)
    return f"({c!r})*r^({(1 - Q) / q!r})*s^({(1 - Q) / p!r})/(r+s)", -Q


def _hardy_averaging() -> tuple[str, float]:
    return "step(r-s)/r", -1.0


@dataclass(frozen=True)
class CatalogEntry:
    """A named kernel family"""
    name: str
    params: tuple[str, ...]
    build: Callable[..., tuple[str, float]]
    description: str


CATALOG: dict[str, CatalogEntry] = {
    "hilbert": CatalogEntry("hilbert", (), _hilbert, "1/(r+s), order -1"),
    "hilbert_lambda": CatalogEntry(
        "hilbert_lambda", ("lam",), _hilbert_lambda, "1/(r^lam+s^lam), order -lam"),
    "weighted_hilbert": CatalogEntry(
        "weighted_hilbert", ("lam", "p", "k_exp"), _weighted_hilbert,
        "r^(-1+lam/m+1/q) s^(-1+lam/k+1/p)/(r^lam+s^lam), order -1"),
    "max_kernel": CatalogEntry("max_kernel", (), _max_kernel, "1/max(r,s), order -1"),
    "group_weighted_hilbert": CatalogEntry(
        "group_weighted_hilbert", ("p", "Q", "c"), _group_weighted_hilbert,
        "c r^((1-Q)/q) s^((1-Q)/p)/(r+s), order -Q"),
    "hardy_averaging": CatalogEntry(
        "hardy_averaging", (), _hardy_averaging, "step(r-s)/r, order -1"),
}


def catalog(name: str, **params: float) -> Kernel:
    """Build a catalog kernel; its declared order is verified on construction"""
    entry = CATALOG.get(name)
    if entry is None:
        raise InputError(f"unknown catalog kernel '{name}'. Known: {', '.join(CATALOG)}")
    missing = [p for p in entry.params if p not in params]
    extra = [p for p in params if p not in entry.params]
    if missing or extra:
        raise InputError(f"{name} takes parameters {entry.params}, got {tuple(params)}")
    values = {k: float(v) for k, v in params.items()}
    text, order = entry.build(**values)
    return make_kernel(text, order, name, values)
