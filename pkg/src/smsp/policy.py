"""Canonical policy model and the three parser frontends.

All input languages produce the same ``PolicyRule``/``PolicySet`` model:

* REI subset: Prolog-style clauses ``has(Var, deontic(action, [cond, ...])).``
* Ponder subset: ``inst (auth+|auth-|oblig) name { subject s; ... }``
* KAOS-style JSON: array of ``{modality, actor, action, target?, context?}``

Parsers are total: any input yields either a ``PolicySet`` or a
``ParseError`` carrying a 1-based line/column location. A canonical
pretty-printer per language supports round-trip testing and harmonized
re-export after renames.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional, Sequence


class Modality(str, Enum):
    AUTH_POS = "A+"
    AUTH_NEG = "A-"
    OBL_POS = "O+"
    OBL_NEG = "O-"
    UNKNOWN = "?"


class SourceLang(str, Enum):
    REI = "rei"
    PONDER = "ponder"
    KAOS = "kaos"


class RefKind(str, Enum):
    VARIABLE = "variable"
    NAMED = "named"


#: Default deontic vocabulary. User-overridable: operator names are domain
#: vocabulary, so pipelines may supply their own table.
DEFAULT_DEONTIC_TABLE: dict[str, Modality] = {
    "permit": Modality.AUTH_POS,
    "allow": Modality.AUTH_POS,
    "grant": Modality.AUTH_POS,
    "prohibit": Modality.AUTH_NEG,
    "deny": Modality.AUTH_NEG,
    "forbid": Modality.AUTH_NEG,
    "oblige": Modality.OBL_POS,
    "must": Modality.OBL_POS,
    "require": Modality.OBL_POS,
    "exempt": Modality.OBL_NEG,
    "waive": Modality.OBL_NEG,
    "dispense": Modality.OBL_NEG,
}


class ParseError(Exception):
    """Syntax or schema error with a source location.

    ``line``/``col`` are 1-based when known; ``path`` locates schema errors
    in structured documents (e.g. ``entries[2].modality``).
    """

    def __init__(self, message: str, line: int | None = None,
                 col: int | None = None, token: str | None = None,
                 path: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.token = token
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        loc = ""
        if self.line is not None:
            loc = f"line {self.line}, col {self.col}: "
        elif self.path is not None:
            loc = f"{self.path}: "
        got = f" (got {self.token!r})" if self.token is not None else ""
        return f"{loc}{self.message}{got}"

    def location(self) -> dict:
        if self.line is not None:
            return {"line": self.line, "col": self.col}
        if self.path is not None:
            return {"path": self.path}
        return {}


def map_deontic(label: str, mapping: Mapping[str, Modality] | None = None) -> Modality:
    """Map a deontic operator label to a modality, case-insensitively.

    Total: labels absent from the table map to ``Modality.UNKNOWN``. The raw
    label is preserved on the rule either way, so alignment can still reason
    over unknown operator vocabulary.
    """
    table = DEFAULT_DEONTIC_TABLE if mapping is None else mapping
    return table.get(label.lower(), Modality.UNKNOWN)


@dataclass(frozen=True)
class EntityRef:
    kind: RefKind
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("entity name must be non-empty")
        if self.kind is RefKind.VARIABLE and not self.name[0].isupper():
            raise ValueError(f"variable name must start uppercase: {self.name!r}")

    @staticmethod
    def variable(name: str) -> "EntityRef":
        return EntityRef(RefKind.VARIABLE, name)

    @staticmethod
    def named(name: str) -> "EntityRef":
        return EntityRef(RefKind.NAMED, name)


@dataclass(frozen=True)
class Condition:
    predicate: str
    args: tuple[EntityRef, ...] = ()

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("condition predicate must be non-empty")

    def sort_key(self):
        return (self.predicate, len(self.args), tuple(a.name for a in self.args))


@dataclass(frozen=True)
class PolicyRule:
    id: str
    domain_id: str
    source_lang: SourceLang
    modality: Modality
    deontic_label: str
    subject: EntityRef
    action: str
    target: Optional[EntityRef] = None
    conditions: tuple[Condition, ...] = ()

    def __post_init__(self):
        if not self.action:
            raise ValueError("rule action must be non-empty")
        if not self.id:
            raise ValueError("rule id must be non-empty")


@dataclass(frozen=True)
class PolicySet:
    domain_id: str
    rules: tuple[PolicyRule, ...] = ()

    def __post_init__(self):
        for r in self.rules:
            if r.domain_id != self.domain_id:
                raise ValueError(
                    f"rule {r.id} has domain {r.domain_id!r}, set is {self.domain_id!r}")
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate rule ids: {dup}")


def normalize_rule(rule: PolicyRule) -> PolicyRule:
    """Sort conditions by (predicate, arity, arg names). Idempotent."""
    ordered = tuple(sorted(rule.conditions, key=Condition.sort_key))
    if ordered == rule.conditions:
        return rule
    return replace(rule, conditions=ordered)


def normalize_policy_set(ps: PolicySet) -> PolicySet:
    rules = tuple(sorted((normalize_rule(r) for r in ps.rules), key=lambda r: r.id))
    return PolicySet(ps.domain_id, rules)


def _content_digest(modality: Modality, deontic: str, subject: EntityRef,
                    action: str, target: Optional[EntityRef],
                    conditions: Sequence[Condition]) -> str:
    # Rule ids hash the normalized rule content, but never the domain id:
    # the same text loaded under two domains must yield identical ids so
    # self-alignment pairs policy nodes by equal labels.
    conds = sorted(conditions, key=Condition.sort_key)
    payload = json.dumps([
        modality.value,
        deontic,
        [subject.kind.value, subject.name],
        action,
        [target.kind.value, target.name] if target else None,
        [[c.predicate, [[a.kind.value, a.name] for a in c.args]] for c in conds],
    ], separators=(",", ":"))
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:8]


def _unique_id(base: str, taken: set[str]) -> str:
    rid = base
    n = 2
    while rid in taken:
        rid = f"{base}-{n}"
        n += 1
    taken.add(rid)
    return rid


def _check_domain_id(domain_id: str):
    if not domain_id or not re.fullmatch(r"[A-Za-z0-9_.\-]+", domain_id):
        raise ParseError(f"invalid domain id {domain_id!r}: use letters, digits, '_', '-', '.'")


def _arg_ref(name: str, subject: EntityRef) -> EntityRef:
    # Occurrences of the bound subject variable inside conditions stay
    # variables; every other identifier (including capitalized domain
    # constants like ITDepartment) is a named entity.
    if name == subject.name and name[0].isupper():
        return EntityRef.variable(name)
    return EntityRef.named(name)


# ---------------------------------------------------------------------------
# REI subset
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*|[()\[\],.]|%[^\n]*|\s+|.", re.DOTALL)


@dataclass(frozen=True)
class _Tok:
    type: str  # IDENT | VAR | punct literal | EOF
    text: str
    line: int
    col: int


def _lex_rei(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(text):
        piece = m.group(0)
        if piece.isspace():
            pass
        elif piece.startswith("%"):
            pass  # line comment
        elif piece[0].isalpha():
            ttype = "VAR" if piece[0].isupper() else "IDENT"
            toks.append(_Tok(ttype, piece, line, col))
        elif piece in "()[],.":
            toks.append(_Tok(piece, piece, line, col))
        else:
            raise ParseError("unexpected character", line, col, piece)
        for ch in piece:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
    toks.append(_Tok("EOF", "", line, col))
    return toks


class _ReiParser:
    def __init__(self, text: str, domain_id: str,
                 deontic_table: Mapping[str, Modality] | None):
        self.toks = _lex_rei(text)
        self.pos = 0
        self.domain_id = domain_id
        self.table = deontic_table

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self, ttype: str, what: str) -> _Tok:
        tok = self.peek()
        if tok.type != ttype:
            raise ParseError(f"expected {what}", tok.line, tok.col,
                             tok.text or "end of input")
        self.pos += 1
        return tok

    def parse(self) -> PolicySet:
        rules: list[PolicyRule] = []
        taken: set[str] = set()
        while self.peek().type != "EOF":
            rules.append(self.clause(taken))
        return PolicySet(self.domain_id, tuple(rules))

    def clause(self, taken: set[str]) -> PolicyRule:
        head = self.take("IDENT", "'has'")
        if head.text != "has":
            raise ParseError("expected 'has'", head.line, head.col, head.text)
        self.take("(", "'('")
        subject = EntityRef.variable(self.take("VAR", "subject variable").text)
        self.take(",", "','")
        deontic = self.take("IDENT", "deontic operator")
        self.take("(", "argument list after deontic operator")
        action = self.take("IDENT", "action identifier").text
        self.take(",", "','")
        self.take("[", "'['")
        conditions: list[Condition] = []
        if self.peek().type != "]":
            conditions.append(self.condition(subject))
            while self.peek().type == ",":
                self.pos += 1
                conditions.append(self.condition(subject))
        self.take("]", "']' or ','")
        self.take(")", "')'")
        self.take(")", "')'")
        self.take(".", "'.'")
        modality = map_deontic(deontic.text, self.table)
        rid = _unique_id(
            "r-" + _content_digest(modality, deontic.text, subject, action, None, conditions),
            taken)
        return PolicyRule(rid, self.domain_id, SourceLang.REI, modality,
                          deontic.text, subject, action, None, tuple(conditions))

    def condition(self, subject: EntityRef) -> Condition:
        pred = self.take("IDENT", "condition predicate")
        self.take("(", "'('")
        args = [self.arg(subject)]
        while self.peek().type == ",":
            self.pos += 1
            args.append(self.arg(subject))
        self.take(")", "')'")
        return Condition(pred.text, tuple(args))

    def arg(self, subject: EntityRef) -> EntityRef:
        tok = self.peek()
        if tok.type not in ("IDENT", "VAR"):
            raise ParseError("expected condition argument", tok.line, tok.col,
                             tok.text or "end of input")
        self.pos += 1
        return _arg_ref(tok.text, subject)


def parse_rei(text: str, domain_id: str,
              deontic_table: Mapping[str, Modality] | None = None) -> PolicySet:
    """Parse REI-subset clauses into a PolicySet.

    Grammar: ``clause := "has" "(" var "," deontic ")" "."`` with
    ``deontic := ident "(" ident "," "[" [cond {"," cond}] "]" ")"``.
    Whitespace is insignificant and ``%`` starts a line comment.
    """
    _check_domain_id(domain_id)
    return _ReiParser(text, domain_id, deontic_table).parse()


def print_rei(ps: PolicySet) -> str:
    """Canonical REI form: single spaces, one clause per line."""
    lines = []
    for r in ps.rules:
        conds = ", ".join(
            f"{c.predicate}({', '.join(a.name for a in c.args)})" for c in r.conditions)
        lines.append(f"has({r.subject.name}, {r.deontic_label}({r.action}, [{conds}])).")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Ponder subset
# ---------------------------------------------------------------------------

_PONDER_MODALITY = {
    "auth+": Modality.AUTH_POS,
    "auth-": Modality.AUTH_NEG,
    "oblig": Modality.OBL_POS,
}

_PONDER_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*[+\-]?|[{}();,]|\s+|.", re.DOTALL)


def _lex_ponder(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    for m in _PONDER_TOKEN_RE.finditer(text):
        piece = m.group(0)
        if piece.isspace():
            pass
        elif piece[0].isalpha():
            # Trailing +/- is only meaningful on the auth keyword.
            if piece[-1] in "+-" and piece[:-1] != "auth":
                raise ParseError("unexpected character", line, col + len(piece) - 1,
                                 piece[-1])
            toks.append(_Tok("WORD", piece, line, col))
        elif piece in "{}();,":
            toks.append(_Tok(piece, piece, line, col))
        else:
            raise ParseError("unexpected character", line, col, piece)
        for ch in piece:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
    toks.append(_Tok("EOF", "", line, col))
    return toks


class _PonderParser:
    def __init__(self, text: str, domain_id: str):
        self.toks = _lex_ponder(text)
        self.pos = 0
        self.domain_id = domain_id

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self, ttype: str, what: str) -> _Tok:
        tok = self.peek()
        if tok.type != ttype:
            raise ParseError(f"expected {what}", tok.line, tok.col,
                             tok.text or "end of input")
        self.pos += 1
        return tok

    def word(self, what: str) -> _Tok:
        return self.take("WORD", what)

    def parse(self) -> PolicySet:
        rules = []
        names: set[str] = set()
        while self.peek().type != "EOF":
            rules.append(self.inst(names))
        return PolicySet(self.domain_id, tuple(rules))

    def inst(self, names: set[str]) -> PolicyRule:
        kw = self.word("'inst'")
        if kw.text != "inst":
            raise ParseError("expected 'inst'", kw.line, kw.col, kw.text)
        mod_tok = self.word("'auth+', 'auth-' or 'oblig'")
        if mod_tok.text not in _PONDER_MODALITY:
            raise ParseError("expected 'auth+', 'auth-' or 'oblig'",
                             mod_tok.line, mod_tok.col, mod_tok.text)
        name_tok = self.word("policy name")
        if name_tok.text in names:
            raise ParseError(f"duplicate policy name {name_tok.text!r}",
                             name_tok.line, name_tok.col)
        names.add(name_tok.text)
        self.take("{", "'{'")
        clauses: dict[str, object] = {}
        while self.peek().type != "}":
            self.clause(clauses)
        close = self.take("}", "'}'")
        for mandatory in ("subject", "action"):
            if mandatory not in clauses:
                raise ParseError(f"missing {mandatory} clause in policy "
                                 f"{name_tok.text!r}", close.line, close.col)
        subject: EntityRef = clauses["subject"]  # type: ignore[assignment]
        conditions = tuple(
            Condition(p, tuple(_arg_ref(a, subject) for a in args))
            for p, args in clauses.get("when", ()))  # type: ignore[union-attr]
        return PolicyRule(
            id=name_tok.text,
            domain_id=self.domain_id,
            source_lang=SourceLang.PONDER,
            modality=_PONDER_MODALITY[mod_tok.text],
            deontic_label=mod_tok.text,
            subject=subject,
            action=clauses["action"],  # type: ignore[arg-type]
            target=clauses.get("target"),  # type: ignore[arg-type]
            conditions=conditions,
        )

    def clause(self, clauses: dict):
        kw = self.word("clause keyword (subject, target, action, when)")
        if kw.text not in ("subject", "target", "action", "when"):
            raise ParseError("expected clause keyword (subject, target, action, when)",
                             kw.line, kw.col, kw.text)
        if kw.text in clauses:
            raise ParseError(f"duplicate {kw.text} clause", kw.line, kw.col)
        if kw.text == "subject":
            clauses["subject"] = EntityRef.named(self.word("subject name").text)
        elif kw.text == "target":
            clauses["target"] = EntityRef.named(self.word("target name").text)
        elif kw.text == "action":
            clauses["action"] = self.word("action name").text
        else:
            conds = [self.cond()]
            while self.peek().type == ",":
                self.pos += 1
                conds.append(self.cond())
            clauses["when"] = conds
        self.take(";", "';'")

    def cond(self) -> tuple[str, list[str]]:
        pred = self.word("condition predicate")
        self.take("(", "'('")
        args = [self.word("condition argument").text]
        while self.peek().type == ",":
            self.pos += 1
            args.append(self.word("condition argument").text)
        self.take(")", "')'")
        return pred.text, args


def parse_ponder(text: str, domain_id: str) -> PolicySet:
    """Parse Ponder-subset ``inst`` blocks into a PolicySet.

    ``subject`` and ``action`` clauses are mandatory, each clause at most
    once per block. ``auth+``/``auth-``/``oblig`` map to positive/negative
    authorization and positive obligation; the keyword is kept verbatim as
    the rule's deontic label.
    """
    _check_domain_id(domain_id)
    return _PonderParser(text, domain_id).parse()


_PONDER_KEYWORD = {m: kw for kw, m in _PONDER_MODALITY.items()}


def _ponder_deontic(rule: PolicyRule) -> str:
    # The subset has a closed operator vocabulary; a renamed deontic label
    # that is no keyword falls back to the rule's modality keyword.
    if rule.deontic_label in _PONDER_MODALITY:
        return rule.deontic_label
    keyword = _PONDER_KEYWORD.get(rule.modality)
    if keyword is None:
        raise ValueError(
            f"rule {rule.id}: modality {rule.modality.value} has no Ponder keyword")
    return keyword


def print_ponder(ps: PolicySet) -> str:
    lines = []
    for r in ps.rules:
        parts = [f"subject {r.subject.name};"]
        if r.target is not None:
            parts.append(f"target {r.target.name};")
        parts.append(f"action {r.action};")
        if r.conditions:
            conds = ", ".join(
                f"{c.predicate}({', '.join(a.name for a in c.args)})" for c in r.conditions)
            parts.append(f"when {conds};")
        lines.append(f"inst {_ponder_deontic(r)} {r.id} {{ {' '.join(parts)} }}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# KAOS-style JSON
# ---------------------------------------------------------------------------

_KAOS_MODALITY = {m.value: m for m in Modality if m is not Modality.UNKNOWN}
_KAOS_KEYS = {"modality", "actor", "action", "target", "context"}


def _schema_error(path: str, message: str) -> ParseError:
    return ParseError(message, path=path)


def _require_str(obj: dict, key: str, path: str, optional: bool = False) -> str | None:
    if key not in obj:
        if optional:
            return None
        raise _schema_error(path, f"missing required field '{key}'")
    val = obj[key]
    if not isinstance(val, str) or not val:
        raise _schema_error(f"{path}.{key}", f"field '{key}' must be a non-empty string")
    return val


def parse_kaos_json(data: bytes | str, domain_id: str) -> PolicySet:
    """Parse a KAOS-style JSON policy document into a PolicySet.

    Top-level array of objects with required ``modality`` (one of "A+",
    "A-", "O+", "O-"), ``actor`` and ``action``; optional ``target`` and
    ``context`` (array of ``{pred, args}``). The modality string is explicit
    in this format, so unknown values are an error rather than UNKNOWN.
    """
    _check_domain_id(domain_id)
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", line=1, col=1) from exc
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, col=exc.colno) from exc
    if not isinstance(doc, list):
        raise _schema_error("$", "document must be a top-level array of policy entries")

    rules: list[PolicyRule] = []
    taken: set[str] = set()
    for i, entry in enumerate(doc):
        path = f"entries[{i}]"
        if not isinstance(entry, dict):
            raise _schema_error(path, "policy entry must be an object")
        unknown = sorted(set(entry) - _KAOS_KEYS)
        if unknown:
            raise _schema_error(f"{path}.{unknown[0]}", f"unknown field '{unknown[0]}'")
        mod_str = _require_str(entry, "modality", path)
        if mod_str not in _KAOS_MODALITY:
            raise _schema_error(f"{path}.modality", f"unknown modality {mod_str!r}")
        actor = _require_str(entry, "actor", path)
        action = _require_str(entry, "action", path)
        target_name = _require_str(entry, "target", path, optional=True)
        subject = EntityRef.named(actor)
        conditions: list[Condition] = []
        context = entry.get("context", [])
        if not isinstance(context, list):
            raise _schema_error(f"{path}.context", "field 'context' must be an array")
        for j, cond in enumerate(context):
            cpath = f"{path}.context[{j}]"
            if not isinstance(cond, dict):
                raise _schema_error(cpath, "context entry must be an object")
            pred = _require_str(cond, "pred", cpath)
            args = cond.get("args", [])
            if not isinstance(args, list) or any(
                    not isinstance(a, str) or not a for a in args):
                raise _schema_error(f"{cpath}.args",
                                    "field 'args' must be an array of non-empty strings")
            extra = sorted(set(cond) - {"pred", "args"})
            if extra:
                raise _schema_error(f"{cpath}.{extra[0]}", f"unknown field '{extra[0]}'")
            conditions.append(Condition(pred, tuple(_arg_ref(a, subject) for a in args)))
        modality = _KAOS_MODALITY[mod_str]
        target = EntityRef.named(target_name) if target_name else None
        rid = _unique_id(
            "k-" + _content_digest(modality, mod_str, subject, action, target, conditions),
            taken)
        rules.append(PolicyRule(rid, domain_id, SourceLang.KAOS, modality, mod_str,
                                subject, action, target, tuple(conditions)))
    return PolicySet(domain_id, tuple(rules))


def print_kaos_json(ps: PolicySet) -> str:
    entries = []
    for r in ps.rules:
        # Modality codes are the format's operator vocabulary; a renamed
        # deontic label falls back to the rule's modality code.
        code = r.deontic_label if r.deontic_label in _KAOS_MODALITY \
            else r.modality.value
        if code not in _KAOS_MODALITY:
            raise ValueError(f"rule {r.id}: modality {code!r} has no KAOS code")
        entry: dict = {
            "modality": code,
            "actor": r.subject.name,
            "action": r.action,
        }
        if r.target is not None:
            entry["target"] = r.target.name
        if r.conditions:
            entry["context"] = [
                {"pred": c.predicate, "args": [a.name for a in c.args]}
                for c in r.conditions]
        entries.append(entry)
    return json.dumps(entries, indent=1) + "\n"


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def parse_policy(lang: SourceLang | str, text: str | bytes, domain_id: str,
                 deontic_table: Mapping[str, Modality] | None = None) -> PolicySet:
    lang = SourceLang(lang)
    if lang is SourceLang.REI:
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="replace")
        return parse_rei(text, domain_id, deontic_table)
    if lang is SourceLang.PONDER:
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="replace")
        return parse_ponder(text, domain_id)
    return parse_kaos_json(text, domain_id)


def print_policy_set(ps: PolicySet, lang: SourceLang | str) -> str:
    lang = SourceLang(lang)
    if lang is SourceLang.REI:
        return print_rei(ps)
    if lang is SourceLang.PONDER:
        return print_ponder(ps)
    return print_kaos_json(ps)


LANG_EXTENSIONS = {
    SourceLang.REI: "rei",
    SourceLang.PONDER: "ponder",
    SourceLang.KAOS: "kaos.json",
}
