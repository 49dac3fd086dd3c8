"""CPLEX-LP and free-MPS writers, plus a reader for the LP subset we write."""

from __future__ import annotations

import math
import re

from .model import Constraint, ModelIR, Variable

_SENSE_LP = {"<=": "<=", ">=": ">=", "=": "="}
_WRAP = 200


def _num(c: float) -> str:
    if float(c).is_integer():
        return str(int(c))
    return repr(float(c))


def _expr(pairs) -> list[str]:
    """Tokens of a linear expression, wrapped onto several lines by the caller."""
    toks = []
    for name, c in pairs:
        sign = "-" if c < 0 else "+"
        a = abs(c)
        body = name if a == 1 else f"{_num(a)} {name}"
        toks.append(f"{sign} {body}" if toks or sign == "-" else body)
    return toks


def _wrapped(head: str, toks: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for tok in toks:
        if len(cur) + len(tok) + 1 > _WRAP:
            lines.append(cur)
            cur = "   "
        cur += " " + tok
    if tail:
        cur += " " + tail
    lines.append(cur)
    return lines


def write_lp(model: ModelIR) -> str:
    names = [v.name for v in model.variables]
    out = [f"\\ {model.name or 'model'}: objective in dollars x {_num(model.objective_scale)}", "Minimize"]
    obj = [(names[i], c) for i, c in sorted(model.objective.items()) if c]
    out += _wrapped(" obj:", _expr(obj) or ["0"])
    out.append("Subject To")
    for con in model.constraints:
        toks = _expr([(names[i], c) for i, c in con.terms])
        if not toks:
            toks = ["0", names[0]] if names else ["0"]
        out += _wrapped(f" {con.name}:", toks, f"{_SENSE_LP[con.sense]} {_num(con.rhs)}")
    bounds = []
    for v in model.variables:
        if v.lb == 0 and math.isinf(v.ub):
            continue
        lo = "-inf" if math.isinf(v.lb) else _num(v.lb)
        hi = "+inf" if math.isinf(v.ub) else _num(v.ub)
        bounds.append(f" {lo} <= {v.name} <= {hi}")
    if bounds:
        out.append("Bounds")
        out += bounds
    ints = [v.name for v in model.variables if v.integer]
    if ints:
        out.append("General")
        out += _wrapped("", ints)
    out.append("End")
    return "\n".join(out) + "\n"


def write_mps(model: ModelIR) -> str:
    names = [v.name for v in model.variables]
    kind = {"<=": "L", ">=": "G", "=": "E"}
    out = [f"NAME {re.sub(r'[^A-Za-z0-9_.]', '.', model.name or 'model')}", "ROWS", " N obj"]
    out += [f" {kind[c.sense]} {c.name}" for c in model.constraints]
    cols: dict[int, list[tuple[str, float]]] = {i: [] for i in range(len(names))}
    for i, c in model.objective.items():
        if c:
            cols[i].append(("obj", c))
    for con in model.constraints:
        for i, c in con.terms:
            cols[i].append((con.name, c))
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for i, v in enumerate(model.variables):
        if v.integer != in_int:
            out.append(f" M{marker} 'MARKER' {'INTORG' if v.integer else 'INTEND'}")
            marker += 1
            in_int = v.integer
        entries = cols[i] or [("obj", 0.0)]
        out += [f" {names[i]} {row} {_num(c)}" for row, c in entries]
    if in_int:
        out.append(f" M{marker} 'MARKER' INTEND")
    rhs = [(c.name, c.rhs) for c in model.constraints if c.rhs]
    out.append("RHS")
    out += [f" RHS {n} {_num(r)}" for n, r in rhs]
    out.append("BOUNDS")
    for v in model.variables:
        if v.lb != 0:
            out.append(f" MI BND {v.name}" if math.isinf(v.lb) else f" LO BND {v.name} {_num(v.lb)}")
        if not math.isinf(v.ub):
            out.append(f" UP BND {v.name} {_num(v.ub)}")
        elif v.integer:
            out.append(f" PL BND {v.name}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


class LPParseError(ValueError):
    pass


_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][A-Za-z0-9_.]*)")


def _parse_expr(text: str) -> list[tuple[str, float]]:
    text = text.strip()
    if text in ("", "0"):
        return []
    pos, out = 0, []
    while pos < len(text):
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip().startswith("0"):
                pos = text.index("0", pos) + 1
                continue
            raise LPParseError(f"cannot parse expression near {text[pos:pos + 30]!r}")
        sign, coef, name = m.groups()
        c = float(coef) if coef else 1.0
        out.append((name, -c if sign == "-" else c))
        pos = m.end()
    return out


def read_lp(text: str) -> ModelIR:
    """Parse the LP subset produced by :func:`write_lp`.

    Semantic keys are not recoverable from a file; ``var_index`` maps
    ``("name", name)`` to the variable index instead.
    """
    section = None
    chunks: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "general": []}
    scale = 1.0
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            m = re.search(r"dollars x ([0-9.eE+-]+)", line)
            if m:
                scale = float(m.group(1))
            continue
        low = line.lower()
        if low in ("minimize", "minimise", "min"):
            section = "obj"
        elif low in ("subject to", "st", "s.t."):
            section = "st"
        elif low == "bounds":
            section = "bounds"
        elif low in ("general", "generals", "integers"):
            section = "general"
        elif low == "end":
            section = None
        elif section is None:
            raise LPParseError(f"text outside any section: {line!r}")
        else:
            chunks[section].append(line)

    model = ModelIR(objective_scale=scale)

    def var(name):
        key = ("name", name)
        if key not in model.var_index:
            model.add_var(key, name, integer=False)
        return model.var_index[key]

    obj_text = " ".join(chunks["obj"])
    obj_text = obj_text.split(":", 1)[1] if ":" in obj_text else obj_text
    for name, c in _parse_expr(obj_text):
        i = var(name)
        model.objective[i] = model.objective.get(i, 0.0) + c

    rows, cur = [], ""
    for line in chunks["st"]:
        cur = f"{cur} {line}".strip()
        if re.search(r"(<=|>=|=)\s*[-+]?[0-9.eE+-]+$", cur):
            rows.append(cur)
            cur = ""
    if cur:
        raise LPParseError(f"unterminated constraint: {cur[:60]!r}")
    for row in rows:
        name, body = row.split(":", 1)
        m = re.match(r"(.*?)(<=|>=|=)\s*([-+]?[0-9.eE+-]+)$", body.strip())
        if not m:
            raise LPParseError(f"bad constraint {row[:60]!r}")
        lhs, sense, rhs = m.groups()
        model.add_constraint(name.strip(), [(var(n), c) for n, c in _parse_expr(lhs)], sense, float(rhs))

    bounds = {}
    for line in chunks["bounds"]:
        m = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", line)
        if not m:
            raise LPParseError(f"bad bound {line!r}")
        lo, name, hi = m.groups()
        bounds[name] = (float(lo), float(hi))
    ints = {n for line in chunks["general"] for n in line.split()}
    for n in ints:
        var(n)
    for name in list(bounds) + sorted(ints):
        i = var(name)
        v = model.variables[i]
        lo, hi = bounds.get(name, (v.lb, v.ub))
        model.variables[i] = Variable(v.name, lo, hi, name in ints)
    return model


__all__ = ["write_lp", "write_mps", "read_lp", "LPParseError", "Constraint"]
