"""Grammar, parsing, mutation enumeration and evaluation of LBP threshold equations.

Two kinds of strings share one grammar::

    E   := T (op T)*
    T   := VAR | '(' E ')' | '(' op VAR ')'
    VAR := Z | C | a

In an *equation structure* every ``op`` is the placeholder ``o``; in a
concrete *equation* every ``op`` is one of ``+ - * /``.  A placeholder that
directly follows an opening parenthesis is unary and only admits ``+``/``-``.

Canonical text separates tokens by single spaces, with no space just inside
parentheses: ``(Z o C) o a``.  Unary terms render as ``(o C)`` in structures
and ``(-C)`` in equations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

__all__ = [
    "OPERATORS",
    "GrammarError",
    "LengthMismatch",
    "InvalidUnaryOperator",
    "EquationStructure",
    "Equation",
    "parse_structure",
    "parse_equation",
    "validate",
    "enumerate_mutations",
    "iter_operator_vectors",
    "apply_operators",
    "evaluate",
    "mutation_count",
    "load_corpus",
    "BASELINE",
]

OPERATORS = ("+", "-", "*", "/")
VARIABLES = ("Z", "C", "a")
PLACEHOLDER = "o"
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
# typographic minus is accepted on input so that "Z − C + a" parses
_ALIASES = {"−": "-", "×": "*", "÷": "/"}


class GrammarError(ValueError):
    """Raised when text does not conform to the equation grammar.

    ``offset`` is the byte offset of the first violation in the input.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class LengthMismatch(ValueError):
    pass


class InvalidUnaryOperator(ValueError):
    pass


# -- syntax tree ------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    var: Var
    slot: int


@dataclass(frozen=True)
class Group:
    chain: "Chain"


@dataclass(frozen=True)
class Chain:
    terms: tuple
    ops: tuple  # operator symbols between terms
    slots: tuple  # placeholder index of each operator


Node = Union[Var, Unary, Group, Chain]


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    encoded_offset = 0
    for ch in text:
        width = len(ch.encode("utf-8"))
        sym = _ALIASES.get(ch, ch)
        if sym.isspace():
            pass
        elif sym in "()" or sym in VARIABLES or sym in OPERATORS or sym == PLACEHOLDER:
            tokens.append((sym, encoded_offset))
        else:
            raise GrammarError(f"unknown token {ch!r}", encoded_offset)
        encoded_offset += width
    return tokens


class _Parser:
    def __init__(self, text: str, structure: bool):
        self.tokens = _tokenize(text)
        self.end = len(text.encode("utf-8"))
        self.pos = 0
        self.slot = 0
        self.structure = structure
        self.unary_slots: list[int] = []

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def offset(self) -> int:
        return self.tokens[self.pos][1] if self.pos < len(self.tokens) else self.end

    def is_op(self, tok: str | None) -> bool:
        if tok is None:
            return False
        return tok == PLACEHOLDER if self.structure else tok in OPERATORS

    def expect_op_kind(self, tok: str | None) -> None:
        # a concrete operator inside a structure, or a placeholder inside an equation
        if tok == PLACEHOLDER or tok in OPERATORS:
            kind = "concrete operator" if self.structure else "placeholder"
            raise GrammarError(f"unexpected {kind} {tok!r}", self.offset())

    def parse(self) -> Chain:
        if not self.tokens:
            raise GrammarError("empty expression", 0)
        chain = self.chain()
        if self.pos != len(self.tokens):
            raise GrammarError(f"unexpected token {self.peek()!r}", self.offset())
        return chain

    def chain(self) -> Chain:
        terms = [self.term()]
        ops, slots = [], []
        while True:
            tok = self.peek()
            if not self.is_op(tok):
                self.expect_op_kind(tok)
                break
            ops.append(tok)
            slots.append(self.slot)
            self.slot += 1
            self.pos += 1
            if self.peek() is None:
                raise GrammarError("dangling operator", self.offset())
            terms.append(self.term())
        return Chain(tuple(terms), tuple(ops), tuple(slots))

    def term(self) -> Node:
        tok = self.peek()
        if tok in VARIABLES:
            self.pos += 1
            return Var(tok)
        if tok == "(":
            self.pos += 1
            if self.is_op(self.peek()):
                op = self.peek()
                if not self.structure and op not in "+-":
                    raise GrammarError(f"unary operator {op!r} not allowed", self.offset())
                slot = self.slot
                self.slot += 1
                self.unary_slots.append(slot)
                self.pos += 1
                if self.peek() not in VARIABLES:
                    raise GrammarError("unary operator must apply to a variable", self.offset())
                var = Var(self.peek())
                self.pos += 1
                self.close()
                return Unary(op, var, slot)
            inner = self.chain()
            self.close()
            return Group(inner)
        if tok is None:
            raise GrammarError("unexpected end of input", self.offset())
        if tok == ")":
            raise GrammarError("unbalanced ')'", self.offset())
        self.expect_op_kind(tok)
        raise GrammarError(f"operator {tok!r} where a term is expected", self.offset())

    def close(self) -> None:
        if self.peek() != ")":
            raise GrammarError("unbalanced parenthesis, expected ')'", self.offset())
        self.pos += 1


def _render(node: Node) -> str:
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == PLACEHOLDER:
            return f"(o {node.var.name})"
        return f"({node.op}{node.var.name})"
    if isinstance(node, Group):
        return "(" + _render(node.chain) + ")"
    parts = [_render(node.terms[0])]
    for op, term in zip(node.ops, node.terms[1:]):
        parts.append(op)
        parts.append(_render(term))
    return " ".join(parts)


def _substitute(node: Node, symbols: Sequence[str]) -> Node:
    if isinstance(node, Var):
        return node
    if isinstance(node, Unary):
        return Unary(symbols[node.slot], node.var, node.slot)
    if isinstance(node, Group):
        return Group(_substitute(node.chain, symbols))
    return Chain(
        tuple(_substitute(t, symbols) for t in node.terms),
        tuple(symbols[s] for s in node.slots),
        node.slots,
    )


def _collect_ops(node: Node, out: dict[int, str]) -> None:
    if isinstance(node, Unary):
        out[node.slot] = node.op
    elif isinstance(node, Group):
        _collect_ops(node.chain, out)
    elif isinstance(node, Chain):
        for t in node.terms:
            _collect_ops(t, out)
        out.update(zip(node.slots, node.ops))


def _compile(node: Node, program: list) -> None:
    """Emit postfix code for ``node``; chains are resolved by precedence."""
    if isinstance(node, Var):
        program.append(("load", node.name))
    elif isinstance(node, Unary):
        program.append(("load", node.var.name))
        if node.op == "-":
            program.append(("neg", None))
    elif isinstance(node, Group):
        _compile(node.chain, program)
    else:
        # shunting-yard over one flat chain; all operators left-associative
        stack: list[str] = []
        _compile(node.terms[0], program)
        for op, term in zip(node.ops, node.terms[1:]):
            while stack and _PRECEDENCE[stack[-1]] >= _PRECEDENCE[op]:
                program.append(("bin", stack.pop()))
            stack.append(op)
            _compile(term, program)
        while stack:
            program.append(("bin", stack.pop()))


# -- value types -------------------------------------------------------------


@dataclass(frozen=True)
class EquationStructure:
    """Operator-placeholder template such as ``(Z o C) o a``.

    Construction parses ``text`` and stores its canonical form; invalid text
    raises :class:`GrammarError`.
    """

    text: str
    placeholder_count: int = field(init=False)
    unary_slots: tuple = field(init=False, repr=False)
    ast: Chain = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        parser = _Parser(self.text, structure=True)
        ast = parser.parse()
        object.__setattr__(self, "ast", ast)
        object.__setattr__(self, "text", _render(ast))
        object.__setattr__(self, "placeholder_count", parser.slot)
        object.__setattr__(self, "unary_slots", tuple(parser.unary_slots))

    @property
    def n_unary(self) -> int:
        return len(self.unary_slots)

    @property
    def n_binary(self) -> int:
        return self.placeholder_count - self.n_unary

    def choices(self) -> list[tuple[int, ...]]:
        """Admissible operator codes for each placeholder, in text order."""
        unary = set(self.unary_slots)
        return [(0, 1) if i in unary else (0, 1, 2, 3) for i in range(self.placeholder_count)]

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Equation:
    """Concrete threshold equation over ``Z``, ``C`` and ``a``."""

    text: str
    ast: Chain = field(init=False, repr=False, compare=False)
    program: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        parser = _Parser(self.text, structure=False)
        ast = parser.parse()
        program: list = []
        _compile(ast, program)
        object.__setattr__(self, "ast", ast)
        object.__setattr__(self, "text", _render(ast))
        object.__setattr__(self, "program", tuple(program))

    @property
    def operators(self) -> tuple[int, ...]:
        """Operator codes (0:+, 1:-, 2:*, 3:/) in placeholder order."""
        found: dict[int, str] = {}
        _collect_ops(self.ast, found)
        return tuple(OPERATORS.index(found[i]) for i in range(len(found)))

    @property
    def source_structure(self) -> EquationStructure:
        found: dict[int, str] = {}
        _collect_ops(self.ast, found)
        return EquationStructure(_render(_substitute(self.ast, [PLACEHOLDER] * len(found))))

    def __call__(self, Z, C, a=0.01):
        return evaluate(self, Z, C, a)

    def __str__(self) -> str:
        return self.text


BASELINE = Equation("Z - C + a")


# -- operations --------------------------------------------------------------


def parse_structure(text: str) -> EquationStructure:
    return EquationStructure(text)


def parse_equation(text: str) -> Equation:
    return Equation(text)


def validate(text) -> bool:
    """True iff ``text`` is a well-formed equation structure. Never raises."""
    if not isinstance(text, str):
        return False
    try:
        EquationStructure(text)
    except GrammarError:
        return False
    return True


def mutation_count(s: EquationStructure) -> int:
    return 4**s.n_binary * 2**s.n_unary


def iter_operator_vectors(s: EquationStructure) -> Iterator[tuple[int, ...]]:
    """Operator vectors in ascending mixed-radix order, first placeholder most significant."""
    return itertools.product(*s.choices())


def apply_operators(s: EquationStructure, v: Sequence[int]) -> Equation:
    """Substitute operator codes into the placeholders of ``s`` left to right."""
    v = [int(c) for c in v]
    if len(v) != s.placeholder_count:
        raise LengthMismatch(f"structure has {s.placeholder_count} placeholders, got {len(v)} operators")
    for code in v:
        if not 0 <= code < len(OPERATORS):
            raise ValueError(f"operator code {code} outside 0..3")
    for slot in s.unary_slots:
        if v[slot] not in (0, 1):
            raise InvalidUnaryOperator(f"placeholder {slot} is unary and admits only + or -, got {OPERATORS[v[slot]]!r}")
    return Equation(_render(_substitute(s.ast, [OPERATORS[c] for c in v])))


def enumerate_mutations(s: EquationStructure, cap: int) -> list[Equation]:
    """All operator assignments of ``s`` in deterministic order, truncated to ``cap``."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    return [apply_operators(s, v) for v in itertools.islice(iter_operator_vectors(s), cap)]


_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}


def evaluate(e: Equation, Z, C, a=0.01):
    """Value of ``e`` at (Z, C, a).

    Inputs may be scalars or broadcastable arrays.  Division by zero and
    overflow produce inf/nan rather than raising; callers decide what a
    non-finite threshold means.
    """
    env = {
        "Z": np.asarray(Z, dtype=np.float64),
        "C": np.asarray(C, dtype=np.float64),
        "a": np.asarray(a, dtype=np.float64),
    }
    stack = []
    with np.errstate(all="ignore"):
        for kind, arg in e.program:
            if kind == "load":
                stack.append(env[arg])
            elif kind == "neg":
                stack.append(np.negative(stack.pop()))
            else:
                rhs = stack.pop()
                stack.append(_BINARY[arg](stack.pop(), rhs))
    (result,) = stack
    if result.ndim == 0:
        return float(result)
    return result


def load_corpus(path=None) -> list[str]:
    """Read a structure corpus (one canonical structure per line).

    Without ``path`` the bundled training corpus is returned.
    """
    if path is None:
        from importlib import resources

        text = resources.files("lbp_discovery").joinpath("data/corpus.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lines = [line.strip() for line in text.splitlines()]
    return [line for line in lines if line]
