"""Textual expression grammar for kernels, means and likelihoods.

Grammar (binary * binds tighter than +, parentheses allowed):

    expr   := term ('+' term)*
    term   := factor ('*' factor)*
    factor := call | '(' expr ')'
    call   := ident '(' args? ')'
    arg    := expr | number | rational | vector | range | ident

Literals: numbers (`0.5`, `-2`), rationals for the Matern order (`1/2`,
`3/2`, `5/2`), vectors `[a, b, ...]`, and integer ranges `a:b`
(inclusive, usable wherever a vector is expected).  A bare identifier is
only legal as the parameter-name argument of `fix` (e.g. `sigma`).

Kernel calls dispatch on the length-scale argument: a scalar selects the
isotropic variant, a vector the ARD variant.  `masked` dimensions and
`fix` parameter indices are 1-based in the textual form and converted to
0-based library indices at build time.

Parse errors carry a 1-based byte offset and the set of expected tokens.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels, likelihoods, means
from .errors import ConfigurationError


class ParseError(ConfigurationError):
    """Syntax error with a 1-based byte offset into the source text."""

    def __init__(self, text, offset, expected):
        self.offset = offset + 1
        self.expected = sorted(expected)
        snippet = text[max(0, offset - 12):offset + 8]
        super().__init__(
            f"syntax error at offset {self.offset} (near {snippet!r}): "
            f"expected {' or '.join(self.expected)}")


class ArityError(ConfigurationError):
    def __init__(self, name, detail):
        super().__init__(f"{name}: {detail}")


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def render(self):
        return format_number(self.value)


@dataclass(frozen=True)
class Rational:
    num: int
    den: int

    @property
    def value(self):
        return self.num / self.den

    def render(self):
        return f"{self.num}/{self.den}"


@dataclass(frozen=True)
class Vector:
    items: tuple

    def render(self):
        return "[" + ", ".join(format_number(v) for v in self.items) + "]"


@dataclass(frozen=True)
class Range:
    start: int
    stop: int

    @property
    def items(self):
        return tuple(float(i) for i in range(self.start, self.stop + 1))

    def render(self):
        return f"{self.start}:{self.stop}"


@dataclass(frozen=True)
class Name:
    text: str

    def render(self):
        return self.text


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()

    def render(self):
        return f"{self.name}(" + ", ".join(a.render() for a in self.args) + ")"


@dataclass(frozen=True)
class SumExpr:
    parts: tuple

    def render(self):
        return " + ".join(p.render() for p in self.parts)


@dataclass(frozen=True)
class ProdExpr:
    parts: tuple

    def render(self):
        out = []
        for p in self.parts:
            r = p.render()
            out.append(f"({r})" if isinstance(p, SumExpr) else r)
        return " * ".join(out)


def format_number(v):
    if v == int(v) and abs(v) < 1e15:
        return f"{v:.1f}"
    return repr(float(v))


def render(node):
    """Canonical text for an AST node; parse(render(t)) == t."""
    return node.render()


# -- tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_Ͱ-Ͽ][A-Za-z_0-9Ͱ-Ͽ]*)
  | (?P<punct>[()\[\],+*/:])
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(text, pos, {"a token"})
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def cur(self):
        return self.tokens[self.i]

    def _fail(self, expected):
        raise ParseError(self.text, self.cur[2], expected)

    def _take(self, kind, value=None):
        k, v, pos = self.cur
        if k != kind or (value is not None and v != value):
            self._fail({value if value is not None else kind})
        self.i += 1
        return v

    def _peek_punct(self, value):
        k, v, _ = self.cur
        return k == "punct" and v == value

    def parse(self):
        node = self.expr()
        if self.cur[0] != "eof":
            self._fail({"'+'", "'*'", "end of input"})
        return node

    def expr(self):
        parts = [self.term()]
        while self._peek_punct("+"):
            self.i += 1
            parts.append(self.term())
        if len(parts) == 1:
            return parts[0]
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, SumExpr) else [p])
        return SumExpr(tuple(flat))

    def term(self):
        parts = [self.factor()]
        while self._peek_punct("*"):
            self.i += 1
            parts.append(self.factor())
        if len(parts) == 1:
            return parts[0]
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, ProdExpr) else [p])
        return ProdExpr(tuple(flat))

    def factor(self):
        k, v, _ = self.cur
        if self._peek_punct("("):
            self.i += 1
            node = self.expr()
            self._take("punct", ")")
            return node
        if k == "ident":
            self.i += 1
            self._take("punct", "(")
            args = []
            if not self._peek_punct(")"):
                args.append(self.argument())
                while self._peek_punct(","):
                    self.i += 1
                    args.append(self.argument())
                if not self._peek_punct(")"):
                    self._fail({"')'", "','"})
            self._take("punct", ")")
            return Call(v, tuple(args))
        self._fail({"identifier", "'('"})

    def argument(self):
        k, v, _ = self.cur
        if self._peek_punct("["):
            return self.vector()
        if k == "number":
            self.i += 1
            if self._peek_punct("/"):
                self.i += 1
                pos = self.cur[2]
                den = self._take("number")
                try:
                    return Rational(int(v), int(den))
                except ValueError:
                    raise ParseError(self.text, pos, {"integer"}) from None
            if self._peek_punct(":"):
                self.i += 1
                pos = self.cur[2]
                stop = self._take("number")
                try:
                    return Range(int(v), int(stop))
                except ValueError:
                    raise ParseError(self.text, pos, {"integer"}) from None
            return Num(float(v))
        if k == "ident":
            # nested call (sub-expression) or a bare name for fix()
            if self.tokens[self.i + 1][:2] == ("punct", "("):
                return self.expr()
            self.i += 1
            return Name(v)
        if self._peek_punct("("):
            return self.expr()
        self._fail({"number", "'['", "identifier", "'('"})

    def vector(self):
        self._take("punct", "[")
        items = []
        if not self._peek_punct("]"):
            items.append(float(self._take("number")))
            while self._peek_punct(","):
                self.i += 1
                items.append(float(self._take("number")))
            if not self._peek_punct("]"):
                self._fail({"']'", "','"})
        self._take("punct", "]")
        return Vector(tuple(items))


def parse(text):
    """Parse an expression into its AST."""
    return _Parser(text).parse()


# -- building library objects ---------------------------------------------------

_KERNEL_ARITY = {
    "Const": "(log_sigma)",
    "Lin": "(log_l | [log_l...])",
    "SE": "(log_l | [log_l...], log_sigma)",
    "Matern": "(1/2|3/2|5/2, log_l | [log_l...], log_sigma)",
    "Periodic": "(log_l, log_sigma, log_p)",
    "RQ": "(log_l | [log_l...], log_sigma, log_alpha)",
    "Poly": "(log_c, log_sigma, degree)",
    "Noise": "(log_sigma)",
    "fix": "(kernel[, name | [1-based indices]])",
    "masked": "(kernel, [1-based dims] | a:b)",
}


def _scalar(arg, name):
    if isinstance(arg, (Num, Rational)):
        return arg.value
    raise ArityError(name, f"expected a scalar argument, found {arg.render()}")


def _scalar_or_vector(arg, name):
    if isinstance(arg, (Vector, Range)):
        return np.array(arg.items)
    return _scalar(arg, name)


def _expect(name, args, count):
    if len(args) != count:
        raise ArityError(
            name, f"takes {count} argument(s) {_KERNEL_ARITY.get(name, '')}, got {len(args)}")


def build_kernel(node):
    """Turn a parsed kernel AST into a Kernel object."""
    if isinstance(node, SumExpr):
        return kernels.Sum(*[build_kernel(p) for p in node.parts])
    if isinstance(node, ProdExpr):
        return kernels.Product(*[build_kernel(p) for p in node.parts])
    if not isinstance(node, Call):
        raise ConfigurationError(f"expected a kernel call, found {node.render()}")
    name, args = node.name, node.args
    if name == "Const":
        _expect(name, args, 1)
        return kernels.Const(_scalar(args[0], name))
    if name == "Noise":
        _expect(name, args, 1)
        return kernels.Noise(_scalar(args[0], name))
    if name == "Lin":
        _expect(name, args, 1)
        return kernels.Lin(_scalar_or_vector(args[0], name))
    if name == "SE":
        _expect(name, args, 2)
        return kernels.SE(_scalar_or_vector(args[0], name), _scalar(args[1], name))
    if name == "Matern":
        _expect(name, args, 3)
        if not isinstance(args[0], Rational):
            raise ArityError(name, "order must be the rational 1/2, 3/2 or 5/2")
        return kernels.Matern(args[0].value, _scalar_or_vector(args[1], name),
                              _scalar(args[2], name))
    if name == "Periodic":
        _expect(name, args, 3)
        return kernels.Periodic(*[_scalar(a, name) for a in args])
    if name == "RQ":
        _expect(name, args, 3)
        return kernels.RQ(_scalar_or_vector(args[0], name),
                          _scalar(args[1], name), _scalar(args[2], name))
    if name == "Poly":
        _expect(name, args, 3)
        deg = _scalar(args[2], name)
        if deg != int(deg) or deg < 1:
            raise ArityError(name, "degree must be a positive integer")
        return kernels.Poly(_scalar(args[0], name), _scalar(args[1], name),
                            degree=int(deg))
    if name.lower() == "fix":
        if len(args) not in (1, 2):
            raise ArityError("fix", f"takes 1 or 2 arguments {_KERNEL_ARITY['fix']}")
        child = build_kernel(args[0])
        if len(args) == 1:
            return kernels.fix(child)
        sel = args[1]
        if isinstance(sel, Name):
            return kernels.fix(child, sel.text)
        if isinstance(sel, (Vector, Range)):
            return kernels.fix(child, [int(i) - 1 for i in sel.items])
        if isinstance(sel, Num):
            return kernels.fix(child, [int(sel.value) - 1])
        raise ArityError("fix", "selector must be a name or 1-based indices")
    if name.lower() == "masked":
        _expect("masked", args, 2)
        child = build_kernel(args[0])
        sel = args[1]
        if not isinstance(sel, (Vector, Range)):
            raise ArityError("masked", "dims must be a vector or range of 1-based indices")
        return kernels.Masked(child, [int(i) - 1 for i in sel.items])
    raise ArityError(name, "unknown kernel; available: "
                     + ", ".join(sorted(_KERNEL_ARITY)))


def parse_kernel(text):
    """Parse kernel-expression text and build the kernel."""
    return build_kernel(parse(text))


def build_mean(node):
    if isinstance(node, SumExpr):
        return means.MeanSum(*[build_mean(p) for p in node.parts])
    if isinstance(node, ProdExpr):
        return means.MeanProduct(*[build_mean(p) for p in node.parts])
    if not isinstance(node, Call):
        raise ConfigurationError(f"expected a mean-function call, found {node.render()}")
    name, args = node.name, node.args
    if name == "MeanZero":
        _expect(name, args, 0)
        return means.MeanZero()
    if name == "MeanConst":
        _expect(name, args, 1)
        return means.MeanConst(_scalar(args[0], name))
    if name == "MeanLin":
        _expect(name, args, 1)
        v = _scalar_or_vector(args[0], name)
        return means.MeanLin(np.atleast_1d(v))
    if name == "MeanPoly":
        # MeanPoly(coefs_for_dim1, coefs_for_dim2, ...): one vector per
        # input dimension, each of length = degree
        if not args:
            raise ArityError(name, "needs one coefficient vector per input dimension")
        rows = []
        for a in args:
            if not isinstance(a, (Vector, Range)):
                raise ArityError(name, "each argument must be a coefficient vector")
            rows.append(list(a.items))
        if len({len(r) for r in rows}) != 1:
            raise ArityError(name, "coefficient vectors must share one degree")
        return means.MeanPoly(np.array(rows))
    raise ArityError(name, "unknown mean; available: MeanZero, MeanConst, "
                     "MeanLin, MeanPoly")


def parse_mean(text):
    return build_mean(parse(text))


def build_likelihood(node):
    if not isinstance(node, Call):
        raise ConfigurationError(f"expected a likelihood call, found {node.render()}")
    name, args = node.name, node.args
    if name == "Bernoulli":
        _expect(name, args, 0)
        return likelihoods.Bernoulli()
    if name == "Binomial":
        _expect(name, args, 1)
        return likelihoods.Binomial(int(_scalar(args[0], name)))
    if name == "Exponential":
        _expect(name, args, 0)
        return likelihoods.Exponential()
    if name == "Gaussian":
        _expect(name, args, 1)
        return likelihoods.Gaussian(_scalar(args[0], name))
    if name == "Poisson":
        _expect(name, args, 0)
        return likelihoods.Poisson()
    if name == "StudentT":
        _expect(name, args, 2)
        return likelihoods.StudentT(_scalar(args[0], name), _scalar(args[1], name))
    raise ArityError(name, "unknown likelihood; available: Bernoulli, "
                     "Binomial, Exponential, Gaussian, Poisson, StudentT")


def parse_likelihood(text):
    return build_likelihood(parse(text))
