"""Local and global states, expression evaluation and state update."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from types import MappingProxyType
from typing import Callable

from chorver.syntax import (BoolLit, ChorError, Expr, FunCall, FunDef, IntLit, LVar, Op,
                            Value, Var)

# results wider than this many bits are refused rather than computed
MAX_BITS = 1 << 20


class EvalError(ChorError):
    """Evaluation of an expression failed (unbound variable, bad exponent)."""


def same_value(a: Value, b: Value) -> bool:
    """Structural equality that keeps ``True`` and ``1`` apart."""
    return isinstance(a, bool) == isinstance(b, bool) and a == b


def value_type(v: Value) -> str:
    return "bool" if isinstance(v, bool) else "int"


def value_str(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def euclid_mod(a: int, m: int) -> int:
    # total: x mod 0 = x; otherwise the SMT-LIB (Euclidean) remainder in [0, |m|)
    if m == 0:
        return a
    return a % abs(m)


def int_pow(a: int, b: int, pos=None) -> int:
    if b < 0:
        raise EvalError(f"negative exponent {b}", pos)
    if b > 1 and abs(a) > 1 and b * abs(a).bit_length() > MAX_BITS:
        raise EvalError(f"result of {a} ^ {b} is too large", pos)
    return a ** b


def _apply(op: str, vals: list, pos) -> Value:
    match op:
        case "+":
            return vals[0] + vals[1]
        case "-":
            return vals[0] - vals[1]
        case "*":
            return vals[0] * vals[1]
        case "mod":
            return euclid_mod(vals[0], vals[1])
        case "^":
            return int_pow(vals[0], vals[1], pos)
        case "=":
            return same_value(vals[0], vals[1])
        case "<":
            return vals[0] < vals[1]
        case "<=":
            return vals[0] <= vals[1]
        case "and":
            return vals[0] and vals[1]
        case "or":
            return vals[0] or vals[1]
        case "not":
            return not vals[0]
    raise EvalError(f"unknown operator {op!r}", pos)


def evaluate(e: Expr, lookup: Callable[[Expr], Value], funcs: Mapping[str, FunDef]) -> Value:
    """Evaluate ``e``; ``lookup`` resolves ``Var``/``LVar`` leaves."""
    match e:
        case IntLit(value=v) | BoolLit(value=v):
            return v
        case Var() | LVar():
            return lookup(e)
        case Op(op=op, args=args, pos=pos):
            return _apply(op, [evaluate(a, lookup, funcs) for a in args], pos)
        case FunCall(name=f, args=args, pos=pos):
            fd = funcs.get(f)
            if fd is None:
                raise EvalError(f"undefined function {f!r}", pos)
            env = dict(zip(fd.params, (evaluate(a, lookup, funcs) for a in args)))

            def local(v, env=env):
                try:
                    return env[v.name]
                except KeyError:
                    raise EvalError(f"unbound parameter {v.name!r} in {f}", v.pos) from None

            return evaluate(fd.body, local, funcs)
    raise EvalError(f"cannot evaluate {e!r}")


def eval_expr(e: Expr, local: Mapping[str, Value], funcs: Mapping[str, FunDef] = {},
              proc: str = "?") -> Value:
    """Evaluate a choreography expression against one process's local state."""

    def lookup(v):
        try:
            return local[v.name]
        except KeyError:
            raise EvalError(f"unbound variable {proc}.{v.name}", v.pos) from None

    return evaluate(e, lookup, funcs)


class State(Mapping):
    """Immutable global state: process -> (variable -> value).

    ``update`` returns a new state and shares untouched local states.
    """

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping[str, Mapping[str, Value]] = {}):
        self._data = {p: MappingProxyType(dict(loc)) for p, loc in data.items()}
        self._hash = None

    @classmethod
    def empty(cls, processes) -> State:
        return cls({p: {} for p in processes})

    @classmethod
    def _raw(cls, data) -> State:
        s = cls.__new__(cls)
        s._data = data
        s._hash = None
        return s

    def __getitem__(self, p: str) -> Mapping[str, Value]:
        return self._data[p]

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def get_var(self, p: str, x: str) -> Value:
        try:
            return self._data[p][x]
        except KeyError:
            raise EvalError(f"unbound variable {p}.{x}") from None

    def update(self, p: str, x: str, v: Value) -> State:
        if p not in self._data:
            raise EvalError(f"unknown process {p!r}")
        data = dict(self._data)
        loc = dict(self._data[p])
        loc[x] = v
        data[p] = MappingProxyType(loc)
        return State._raw(data)

    def _key(self):
        return frozenset(
            (p, x, isinstance(v, bool), v) for p, loc in self._data.items() for x, v in loc.items()
        ) | frozenset((p,) for p in self._data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self is other or (hash(self) == hash(other) and self._key() == other._key())

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def bindings(self) -> list[tuple[str, str, Value]]:
        return sorted((p, x, v) for p, loc in self._data.items() for x, v in loc.items())

    def to_dict(self) -> dict[str, dict[str, Value]]:
        return {p: dict(sorted(loc.items())) for p, loc in sorted(self._data.items())}

    def __repr__(self) -> str:
        return f"State({self.to_dict()!r})"

    def __str__(self) -> str:
        return state_text(self)


def update(sigma: State, p: str, x: str, v: Value) -> State:
    return sigma.update(p, x, v)


def state_text(sigma: State) -> str:
    """Render in the ``.state`` file format."""
    return "".join(f"{p}.{x} = {value_str(v)}\n" for p, x, v in sigma.bindings())
