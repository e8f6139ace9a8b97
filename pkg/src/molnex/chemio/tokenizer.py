"""SMILES lexer for the organic subset plus bracket atoms."""
from __future__ import annotations

from dataclasses import dataclass

from ..molgraph import ELEMENT_SET, BondType, Chirality


class SmilesError(ValueError):
    def __init__(self, msg: str, position: int | None = None):
        super().__init__(msg if position is None else f"{msg} at position {position}")
        self.position = position


class UnknownSymbol(SmilesError):
    pass


class UnbalancedBracket(SmilesError):
    pass


class UnbalancedRing(SmilesError):
    pass


class UnbalancedBranch(SmilesError):
    pass


ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")

BOND_SYMBOLS = {
    "-": BondType.SINGLE,
    "=": BondType.DOUBLE,
    "#": BondType.TRIPLE,
    ":": BondType.AROMATIC,
    "/": BondType.SINGLE,
    "\\": BondType.SINGLE,
}


@dataclass(frozen=True)
class AtomOrganic:
    symbol: str
    aromatic: bool = False
    pos: int = 0


@dataclass(frozen=True)
class AtomBracket:
    symbol: str
    charge: int = 0
    hcount: int = 0
    chirality: Chirality = Chirality.UNSPECIFIED
    aromatic: bool = False
    rgroup: int | None = None
    pos: int = 0


@dataclass(frozen=True)
class BondSym:
    kind: BondType
    char: str = "-"
    pos: int = 0


@dataclass(frozen=True)
class RingClosure:
    number: int
    pos: int = 0


@dataclass(frozen=True)
class BranchOpen:
    pos: int = 0


@dataclass(frozen=True)
class BranchClose:
    pos: int = 0


@dataclass(frozen=True)
class Dot:
    pos: int = 0


SmilesToken = AtomOrganic | AtomBracket | BondSym | RingClosure | BranchOpen | BranchClose | Dot


def _read_int(s: str, k: int) -> tuple[int | None, int]:
    j = k
    while j < len(s) and s[j].isdigit():
        j += 1
    if j == k:
        return None, k
    return int(s[k:j]), j


def _parse_bracket(body: str, start: int) -> AtomBracket:
    k = 0
    isotope, k = _read_int(body, k)
    if k >= len(body):
        raise UnknownSymbol("empty bracket atom", start)
    aromatic = False
    if body[k] == "*":
        symbol = "*"
        k += 1
    else:
        symbol = None
        for cand in AROMATIC_BRACKET:
            if body.startswith(cand, k):
                symbol, aromatic = cand[0].upper() + cand[1:], True
                k += len(cand)
                break
        if symbol is None:
            two = body[k : k + 2]
            if len(two) == 2 and two in ELEMENT_SET:
                symbol = two
            elif body[k] in ELEMENT_SET:
                symbol = body[k]
            else:
                raise UnknownSymbol(f"unknown element in [{body}]", start + 1 + k)
            k += len(symbol)
    if isotope is not None and symbol != "*":
        raise UnknownSymbol("isotopes are not supported", start + 1)
    chirality = Chirality.UNSPECIFIED
    if body.startswith("@@", k):
        chirality, k = Chirality.CW, k + 2
    elif body.startswith("@", k):
        chirality, k = Chirality.CCW, k + 1
    if k < len(body) and body[k] == "@":
        raise UnknownSymbol("unsupported chirality class", start + 1 + k)
    hcount = 0
    if k < len(body) and body[k] == "H":
        k += 1
        n, k = _read_int(body, k)
        hcount = 1 if n is None else n
    charge = 0
    if k < len(body) and body[k] in "+-":
        sign = 1 if body[k] == "+" else -1
        ch = body[k]
        k += 1
        n, k2 = _read_int(body, k)
        if n is not None:
            charge, k = sign * n, k2
        else:
            mag = 1
            while k < len(body) and body[k] == ch:
                mag += 1
                k += 1
            charge = sign * mag
    if k < len(body) and body[k] == ":":
        _, k = _read_int(body, k + 1)
    if k != len(body):
        raise UnknownSymbol(f"unexpected {body[k]!r} in bracket atom", start + 1 + k)
    return AtomBracket(symbol, charge, hcount, chirality, aromatic, isotope if symbol == "*" else None, start)


def smiles_tokenize(s: str) -> list[SmilesToken]:
    tokens: list[SmilesToken] = []
    open_rings: dict[int, int] = {}
    depth = 0
    k = 0
    while k < len(s):
        c = s[k]
        if c == "[":
            end = s.find("]", k)
            if end < 0:
                raise UnbalancedBracket("unclosed '['", k)
            tokens.append(_parse_bracket(s[k + 1 : end], k))
            k = end + 1
            continue
        if c == "]":
            raise UnbalancedBracket("unmatched ']'", k)
        if c == "*":
            tokens.append(AtomOrganic("*", False, k))
            k += 1
            continue
        if s.startswith("Cl", k) or s.startswith("Br", k):
            tokens.append(AtomOrganic(s[k : k + 2], False, k))
            k += 2
            continue
        if c in "BCNOPSFI":
            tokens.append(AtomOrganic(c, False, k))
            k += 1
            continue
        if c in AROMATIC_ORGANIC:
            tokens.append(AtomOrganic(c.upper(), True, k))
            k += 1
            continue
        if c in BOND_SYMBOLS:
            tokens.append(BondSym(BOND_SYMBOLS[c], c, k))
            k += 1
            continue
        if c.isdigit() or c == "%":
            if c == "%":
                digits = s[k + 1 : k + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise UnknownSymbol("bad %nn ring closure", k)
                num, width = int(digits), 3
            else:
                num, width = int(c), 1
            if num in open_rings:
                del open_rings[num]
            else:
                open_rings[num] = k
            tokens.append(RingClosure(num, k))
            k += width
            continue
        if c == "(":
            depth += 1
            tokens.append(BranchOpen(k))
            k += 1
            continue
        if c == ")":
            depth -= 1
            if depth < 0:
                raise UnbalancedBranch("unmatched ')'", k)
            tokens.append(BranchClose(k))
            k += 1
            continue
        if c == ".":
            tokens.append(Dot(k))
            k += 1
            continue
        raise UnknownSymbol(f"unknown symbol {c!r}", k)
    if open_rings:
        num, pos = min(open_rings.items(), key=lambda kv: kv[1])
        raise UnbalancedRing(f"ring closure {num} never closed", pos)
    if depth:
        raise UnbalancedBranch("unclosed '('", len(s))
    return tokens
