"""Model configuration files.

Text format, one entry per line, ``#`` starts a comment::

    name = hopping
    nu = 1
    param t = 1.0
    param h = 0.25
    term = 0 1 : t * (adag[0] * a[1] + adag[1] * a[0])
    term = 0 : h * v[0]
    beta = 0.5, 1.0
    sizes = 2, 4, 6, 8
    tiles = 1, 2, 4
    seed = 42
    tolerance = 1e-9

Sites of a term are whitespace separated with comma separated coordinates;
``a[k]``, ``adag[k]``, ``n[k]`` and ``v[k]`` refer to the k-th listed site.
A JSON file with the same keys (``params`` as an object and ``terms`` as a
list of ``{"sites": [...], "expr": "..."}``) is accepted as well.
"""

from __future__ import annotations

import ast
import json
import operator
from dataclasses import dataclass, field

import numpy as np

from .car import (
    LocalOperator,
    Region,
    RegionError,
    annihilation,
    build_region,
    embed,
    number,
    op_norm,
    theta,
    v_unitary,
)
from .potentials import Potential, standardize_covariant, validate_standard


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None, path=None):
        self.message = message
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{path or 'config'}{where}: {message}")


@dataclass
class TermSpec:
    sites: list
    expr: str
    line: int | None = None
    column: int | None = None


@dataclass
class ModelConfig:
    name: str = "model"
    nu: int = 1
    params: dict = field(default_factory=dict)
    terms: list = field(default_factory=list)
    beta: list = field(default_factory=lambda: [1.0])
    sizes: list = field(default_factory=lambda: [2, 4, 6])
    tiles: list = field(default_factory=lambda: [1, 2, 4])
    seed: int = 0
    tolerance: float = 1e-9
    standardize: bool = True
    out: str = "."
    path: str | None = None


# ---------------------------------------------------------------- expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_OPS = ("a", "adag", "n", "v")


class _Evaluator:
    def __init__(self, region, params, spec):
        self.region = region
        self.params = params
        self.spec = spec

    def fail(self, node, msg):
        col = None if self.spec.column is None else self.spec.column + getattr(node, "col_offset", 0)
        raise ConfigError(msg, self.spec.line, col)

    def site_op(self, name, k, node):
        if not 0 <= k < len(self.spec.sites):
            self.fail(node, f"site index {k} out of range for {len(self.spec.sites)} listed sites")
        s = self.spec.sites[k]
        R = self.region
        if name == "a":
            return annihilation(s, R)
        if name == "adag":
            return annihilation(s, R).dag
        if name == "n":
            return number(s, R)
        single = Region((s,), R.nu)
        return embed(v_unitary(single, single), R)

    def eval(self, node):
        if isinstance(node, ast.Expression):
            return self.eval(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in self.params:
                return self.params[node.id]
            self.fail(node, f"unknown name {node.id!r}")
        if isinstance(node, ast.Subscript):
            if not (isinstance(node.value, ast.Name) and node.value.id in _OPS):
                self.fail(node, "only a[k], adag[k], n[k] and v[k] may be indexed")
            idx = node.slice
            if not (isinstance(idx, ast.Constant) and isinstance(idx.value, int)):
                self.fail(node, "site index must be an integer literal")
            return self.site_op(node.value.id, idx.value, node)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            x = self.eval(node.operand)
            return -x if isinstance(node.op, ast.USub) else x
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left, right = self.eval(node.left), self.eval(node.right)
            lop, rop = isinstance(left, LocalOperator), isinstance(right, LocalOperator)
            if isinstance(node.op, ast.Mult) and lop and rop:
                return left @ right
            if isinstance(node.op, ast.Div) and rop:
                self.fail(node, "division by an operator")
            if isinstance(node.op, ast.Mult) and rop and not lop:
                return right * left
            if isinstance(node.op, (ast.Add, ast.Sub)) and rop and not lop:
                right_scalar = LocalOperator(right.region, np.eye(right.dim) * left)
                return _BINOPS[type(node.op)](right_scalar, right)
            return _BINOPS[type(node.op)](left, right)
        self.fail(node, f"unsupported syntax {type(node).__name__}")


def term_operator(spec, nu, params):
    """Evaluate one term to an operator on the anchored region of its sites."""
    try:
        R = build_region(spec.sites, nu)
    except RegionError as exc:
        raise ConfigError(str(exc), spec.line, spec.column) from None
    try:
        tree = ast.parse(spec.expr.strip(), mode="eval")
    except SyntaxError as exc:
        col = None if spec.column is None or exc.offset is None else spec.column + exc.offset - 1
        raise ConfigError(f"malformed expression: {exc.msg}", spec.line, col) from None
    val = _Evaluator(R, params, spec).eval(tree)
    if not isinstance(val, LocalOperator):
        val = LocalOperator(R, np.eye(1 << len(R)) * complex(val))
    tol = 1e-12 * max(1.0, op_norm(val))
    if op_norm(val - val.dag) > tol:
        raise ConfigError("term is not self-adjoint", spec.line, spec.column)
    if op_norm(val - theta(val)) > tol:
        raise ConfigError("term is not even", spec.line, spec.column)
    return R.anchored(), LocalOperator(R.anchored(), val.matrix)


def build_potential(cfg):
    """Covariant potential of a config, standardized when requested.

    Returns ``(Phi, constant)`` where ``constant`` is the per-site scalar
    removed by standardization (0 when the terms were already standard).
    """
    if not cfg.terms:
        raise ConfigError("no terms given", path=cfg.path)
    gen = {}
    for spec in cfg.terms:
        try:
            K, op = term_operator(spec, cfg.nu, cfg.params)
        except ConfigError as exc:
            raise ConfigError(exc.message, exc.line, exc.column, cfg.path) from None
        gen[K] = gen[K] + op if K in gen else op
    Phi = Potential(generator=gen, kind="general", nu=cfg.nu, name=cfg.name)
    probe = max(gen, key=len).expand(Phi.range)
    if validate_standard(Phi, probe).verdict == "pass":
        return Potential(generator=gen, kind="standard", nu=cfg.nu, name=cfg.name), 0.0
    if not cfg.standardize:
        raise ConfigError("terms are not standard and standardize = false", path=cfg.path)
    Phi_s, C = standardize_covariant(Phi)
    Phi_s.name = cfg.name
    return Phi_s, C


# ---------------------------------------------------------------- parsing

def _parse_sites(text, nu, line, col):
    sites = []
    for tok in text.split():
        try:
            coords = tuple(int(c) for c in tok.split(","))
        except ValueError:
            raise ConfigError(f"bad site {tok!r}", line, col) from None
        if len(coords) != nu:
            raise ConfigError(f"site {tok!r} needs {nu} coordinates", line, col)
        sites.append(coords)
    if not sites:
        raise ConfigError("term lists no sites", line, col)
    return sites


def _floats(value, line, key):
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key} expects comma separated numbers", line) from None


def _ints(value, line, key):
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key} expects comma separated integers", line) from None


def _bool(value, line, key):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} expects a boolean", line)


def parse_text(text, path=None):
    cfg = ModelConfig(path=path)
    raw_terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, 1, path)
        key, value = line.split("=", 1)
        key = key.strip()
        vcol = line.index("=") + 2
        try:
            if key.startswith("param "):
                name = key[6:].strip()
                if not name.isidentifier() or name in _OPS:
                    raise ConfigError(f"bad parameter name {name!r}", lineno, 1)
                try:
                    cfg.params[name] = float(value)
                except ValueError:
                    raise ConfigError(f"parameter {name} needs a number", lineno, vcol) from None
            elif key == "term":
                if ":" not in value:
                    raise ConfigError("term needs 'sites : expression'", lineno, vcol)
                sites_txt, expr = value.split(":", 1)
                ecol = vcol + len(sites_txt) + 1 + (len(expr) - len(expr.lstrip()))
                raw_terms.append((sites_txt, expr, lineno, vcol, ecol))
            elif key == "name":
                cfg.name = value.strip()
            elif key == "nu":
                cfg.nu = int(value)
            elif key == "beta":
                cfg.beta = _floats(value, lineno, key)
            elif key == "sizes":
                cfg.sizes = _ints(value, lineno, key)
            elif key == "tiles":
                cfg.tiles = _ints(value, lineno, key)
            elif key == "seed":
                cfg.seed = int(value)
            elif key == "tolerance":
                cfg.tolerance = float(value)
            elif key == "standardize":
                cfg.standardize = _bool(value, lineno, key)
            elif key == "out":
                cfg.out = value.strip()
            else:
                raise ConfigError(f"unknown key {key!r}", lineno, 1)
        except ConfigError as exc:
            exc.path = path
            raise ConfigError(exc.message, exc.line, exc.column, path) from None
        except ValueError:
            raise ConfigError(f"bad value for {key}", lineno, vcol, path) from None
    for sites_txt, expr, lineno, scol, ecol in raw_terms:
        sites = _parse_sites(sites_txt, cfg.nu, lineno, scol)
        cfg.terms.append(TermSpec(sites, expr, lineno, ecol))
    _check(cfg)
    return cfg


def parse_json(text, path=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, exc.colno, path) from None
    cfg = ModelConfig(path=path)
    known = {"name", "nu", "params", "terms", "beta", "sizes", "tiles", "seed", "tolerance", "standardize", "out"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", path=path)
    try:
        cfg.name = str(data.get("name", cfg.name))
        cfg.nu = int(data.get("nu", cfg.nu))
        cfg.params = {str(k): float(v) for k, v in data.get("params", {}).items()}
        cfg.beta = [float(x) for x in data.get("beta", cfg.beta)]
        cfg.sizes = [int(x) for x in data.get("sizes", cfg.sizes)]
        cfg.tiles = [int(x) for x in data.get("tiles", cfg.tiles)]
        cfg.seed = int(data.get("seed", cfg.seed))
        cfg.tolerance = float(data.get("tolerance", cfg.tolerance))
        cfg.standardize = bool(data.get("standardize", cfg.standardize))
        cfg.out = str(data.get("out", cfg.out))
        for k, t in enumerate(data.get("terms", [])):
            sites = [tuple(int(c) for c in (s if isinstance(s, list) else [s])) for s in t["sites"]]
            cfg.terms.append(TermSpec(sites, str(t["expr"]), None, None))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad value: {exc}", path=path) from None
    _check(cfg)
    return cfg


def _check(cfg):
    if cfg.nu < 1:
        raise ConfigError("nu must be positive", path=cfg.path)
    if not cfg.beta or any(b < 0 for b in cfg.beta):
        raise ConfigError("beta must be a nonempty list of non-negative numbers", path=cfg.path)
    for key in ("sizes", "tiles"):
        vals = getattr(cfg, key)
        if not vals or any(v < 1 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"{key} must be positive and strictly increasing", path=cfg.path)
    for t in cfg.terms:
        if any(len(s) != cfg.nu for s in t.sites):
            raise ConfigError(f"term sites need {cfg.nu} coordinates", t.line, path=cfg.path)


def load(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        return parse_json(text, str(path))
    return parse_text(text, str(path))


__all__ = ["ConfigError", "ModelConfig", "TermSpec", "load", "parse_text", "parse_json", "build_potential",
           "term_operator"]
