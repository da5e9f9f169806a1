"""Batch experiment runner.

Usage::

    proxnet run spec.json [--parameters.replicates 50] [--master_seed 7] [--workers 4]
    proxnet validate spec.json
    proxnet list-kinds
    proxnet version

A spec file is a JSON object with ``kind``, ``parameters``, ``master_seed``
and optionally ``output_dir`` (default: ``$PROXNET_OUTPUT_DIR`` or
``./results``).  Exit codes: 0 ok, 2 parameter error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .errors import InvalidParameterError
from .experiment import ExperimentResult, derive_seed, mean_se

OUTPUT_ENV = "PROXNET_OUTPUT_DIR"
NETWORKS = ("rng", "gabriel", "beta_skeleton", "delaunay", "mst")


class SpecError(InvalidParameterError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


# --- parameter schema ------------------------------------------------------

@dataclass(frozen=True)
class Param:
    check: Callable[[Any], bool]
    describe: str
    default: Any = None
    required: bool = False


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pos_int(v):
    return _is_int(v) and v >= 1


def _nonneg(v):
    return _is_num(v) and v >= 0


def _pos(v):
    return _is_num(v) and v > 0


def _pos_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_pos(x) for x in v)


def _increasing(v):
    return _pos_list(v) and all(b > a for a, b in zip(v, v[1:]))


def _prob(v):
    return _is_num(v) and 0 <= v <= 1


def _one_of(*opts):
    return lambda v: v in opts


def _opt(check):
    return lambda v: v is None or check(v)


REPS = Param(_pos_int, "an integer >= 1", required=True)
INTENSITY = Param(_nonneg, "a finite number >= 0", 1.0)
NETWORK = Param(_one_of(*NETWORKS), f"one of {', '.join(NETWORKS)}", "rng")
BETA = Param(_opt(lambda v: _is_num(v) and v >= 1), "null or a number >= 1")

SCHEMAS: dict[str, dict[str, Param]] = {
    "ac_sweep": {
        "rule": Param(lambda v: v in ("rng", "gabriel") or (isinstance(v, str) and v.startswith("beta:")),
                      "rng, gabriel or beta:<beta>", "rng"),
        "Ls": Param(_increasing, "a non-empty increasing list of positive numbers", required=True),
        "replicates": REPS, "intensity": INTENSITY,
    },
    "linearity": {
        "network": NETWORK, "beta": BETA,
        "rs": Param(_pos_list, "a non-empty list of positive numbers", required=True),
        "replicates": REPS, "intensity": INTENSITY,
        "margin": Param(_opt(_pos), "null or a positive number"),
        "margin_factor": Param(_opt(_pos), "null or a positive number"),
        "angle": Param(_is_num, "a finite number (radians)", 0.0),
    },
    "moment": {
        "network": NETWORK, "beta": BETA,
        "r": Param(_pos, "a positive number", required=True),
        "k": Param(_pos_int, "an integer >= 1", 1),
        "replicates": REPS, "intensity": INTENSITY,
        "margin": Param(_opt(_pos), "null or a positive number"),
    },
    "stretch": {
        "network": NETWORK, "beta": BETA,
        "ns": Param(lambda v: isinstance(v, list) and v and all(_is_int(x) and x >= 2 for x in v),
                    "a non-empty list of integers >= 2", required=True),
        "replicates": REPS,
    },
    "perc_t": {
        "p": Param(_prob, "a probability in [0, 1]", required=True),
        "mechanism": Param(_one_of("independent", "edge_and"), "independent or edge_and", "independent"),
        "half_width": Param(lambda v: _is_int(v) and v >= 2, "an integer >= 2", 50),
        "half_heights": Param(lambda v: isinstance(v, list) and v and all(_is_int(x) and x >= 1 for x in v),
                              "a non-empty list of integers >= 1", [50, 100]),
        "replicates": REPS,
    },
    "good_prob": {
        "Ls": Param(_pos_list, "a non-empty list of positive numbers", required=True),
        "c_Ls": Param(_pos_list, "a non-empty list of positive numbers", [1e9]),
        "replicates": REPS, "intensity": INTENSITY,
        "thresholds": Param(lambda v: isinstance(v, list) and all(_prob(x) for x in v),
                            "a list of probabilities", [0.9, 0.95, 0.99]),
    },
    "chains": {
        "L": Param(_pos, "a positive number", 10.0),
        "ns": Param(lambda v: isinstance(v, list) and v and all(_pos_int(x) for x in v),
                    "a non-empty list of integers >= 1", required=True),
        "d0s": Param(lambda v: isinstance(v, list) and v and all(_nonneg(x) for x in v),
                     "a non-empty list of numbers >= 0", required=True),
        "replicates": REPS, "intensity": INTENSITY,
        "work_cap": Param(_pos_int, "an integer >= 1", 10**8),
    },
    "prop2": {
        "Ls": Param(_pos_list, "a non-empty list of positive numbers", required=True),
        "replicates": REPS, "intensity": INTENSITY,
        "c_star": Param(_pos, "a positive number", 2.0),
    },
    "mst_longest": {
        "Ls": Param(_pos_list, "a non-empty list of positive numbers", required=True),
        "replicates": REPS, "intensity": INTENSITY,
    },
}


@dataclass
class ExperimentSpec:
    kind: str
    parameters: dict
    master_seed: int
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "results"))
    workers: int = 1

    def fingerprint(self) -> str:
        """Hash of kind, resolved parameters and seed; workers and paths excluded."""
        body = json.dumps({"kind": self.kind, "parameters": self.parameters,
                           "master_seed": self.master_seed}, sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": self.parameters, "master_seed": self.master_seed,
                "output_dir": self.output_dir, "workers": self.workers}


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    needle = f'"{key}"'
    for no, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f" (line {no})"
    return ""


def check_spec(raw: Any, text: str | None = None) -> list[str]:
    """All schema problems in a raw spec mapping; empty when valid."""
    errs: list[str] = []
    if not isinstance(raw, dict):
        return ["spec must be a JSON object"]
    known = {"kind", "parameters", "master_seed", "output_dir", "workers"}
    for k in raw:
        if k not in known:
            errs.append(f"{k}: unknown top-level field{_line_of(text, k)}")
    kind = raw.get("kind")
    if kind not in SCHEMAS:
        errs.append(f"kind: unknown kind {kind!r}; valid kinds: {', '.join(SCHEMAS)}{_line_of(text, 'kind')}")
    if "master_seed" not in raw:
        errs.append("master_seed: required (seeds are never generated implicitly)")
    elif not (_is_int(raw["master_seed"]) and 0 <= raw["master_seed"] < 2**63):
        errs.append(f"master_seed: must be an integer in [0, 2^63){_line_of(text, 'master_seed')}")
    if "workers" in raw and not _pos_int(raw["workers"]):
        errs.append(f"workers: must be an integer >= 1{_line_of(text, 'workers')}")
    if "output_dir" in raw and not isinstance(raw["output_dir"], str):
        errs.append(f"output_dir: must be a string{_line_of(text, 'output_dir')}")
    params = raw.get("parameters", {})
    if not isinstance(params, dict):
        errs.append("parameters: must be an object")
        return errs
    if kind in SCHEMAS:
        schema = SCHEMAS[kind]
        for k in params:
            if k not in schema:
                errs.append(f"parameters.{k}: unknown parameter for {kind}; expected one of "
                            f"{', '.join(schema)}{_line_of(text, k)}")
        for k, p in schema.items():
            if k not in params:
                if p.required:
                    errs.append(f"parameters.{k}: required")
                continue
            if not p.check(params[k]):
                errs.append(f"parameters.{k}: must be {p.describe}, got {params[k]!r}{_line_of(text, k)}")
    return errs


def parse_spec(raw: dict, text: str | None = None) -> ExperimentSpec:
    errs = check_spec(raw, text)
    if errs:
        raise SpecError(errs)
    schema = SCHEMAS[raw["kind"]]
    params = {k: raw["parameters"].get(k, p.default) for k, p in schema.items()}
    spec = ExperimentSpec(raw["kind"], params, raw["master_seed"], workers=raw.get("workers", 1))
    if "output_dir" in raw:
        spec.output_dir = raw["output_dir"]
    return spec


def load_spec(path: str | Path, overrides: dict | None = None) -> ExperimentSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([f"invalid JSON at line {exc.lineno}: {exc.msg}"]) from None
    raw = _unwrap_manifest(raw)
    for dotted, value in (overrides or {}).items():
        target = raw
        *head, last = dotted.split(".")
        for h in head:
            target = target.setdefault(h, {})
        target[last] = value
    return parse_spec(raw, text)


def validate(path: str | Path) -> list[str]:
    """Schema problems of a spec file, or ``[]``.  Raises ``OSError`` if unreadable."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        return [f"invalid JSON at line {exc.lineno}: {exc.msg}"]
    return check_spec(_unwrap_manifest(raw), text)


def _unwrap_manifest(raw):
    # a manifest written by run() can be fed back in as a spec
    if isinstance(raw, dict) and "spec_fingerprint" in raw and isinstance(raw.get("spec"), dict):
        return dict(raw["spec"])
    return raw


# --- dispatch --------------------------------------------------------------

def _merge(kind: str, parts: list[ExperimentResult], summary: dict) -> ExperimentResult:
    return ExperimentResult(kind, parts[0].columns, [r for p in parts for r in p.rows], summary)


def execute(spec: ExperimentSpec) -> ExperimentResult:
    """Run the operation named by ``spec.kind``; no files are written."""
    from . import chains, perc, robust, routes

    p, seed, w = spec.parameters, spec.master_seed, spec.workers
    kind = spec.kind
    if kind == "ac_sweep":
        res = robust.ac_sweep(p["rule"], p["Ls"], p["replicates"], seed, p["intensity"], w)
    elif kind == "linearity":
        res = routes.linearity_curve(p["network"], p["rs"], p["replicates"], seed, p["margin"],
                                     p["intensity"], p["angle"], p["beta"], w, p["margin_factor"])
    elif kind == "moment":
        rows = routes.route_rows(p["network"], [p["r"]], p["replicates"], seed, p["margin"],
                                 p["intensity"], 0.0, p["beta"], w)
        scale = max(1.0, float(p["r"]) ** p["k"])
        m, se = mean_se([r["ell"] ** p["k"] / scale for r in rows])
        res = ExperimentResult("moment", routes.ROUTE_COLUMNS, rows,
                               {"network": p["network"], "r": p["r"], "k": p["k"],
                                "moment_ratio": m, "stderr": se})
    elif kind == "stretch":
        res = routes.stretch_sweep(p["network"], p["ns"], p["replicates"], seed, p["beta"], w)
    elif kind == "perc_t":
        res = perc.t_sweep(p["p"], p["mechanism"], p["half_width"], p["half_heights"],
                           p["replicates"], seed, w)
    elif kind == "good_prob":
        res = perc.good_probability(p["Ls"], p["c_Ls"], p["replicates"], seed, p["intensity"],
                                    p["thresholds"], w)
    elif kind == "chains":
        parts, table = [], []
        for a, n in enumerate(p["ns"]):
            for b, d0 in enumerate(p["d0s"]):
                prob, se, bound, r = chains.decreasing_chain_probability(
                    p["L"], d0, n, p["intensity"], p["replicates"], derive_seed(seed, a, b),
                    p["work_cap"], w)
                parts.append(r)
                table.append({"n": n, "d0": d0, "probability": prob, "stderr": se, "bound": bound,
                              "within_bound": r.summary.get("within_bound", True)})
        res = ExperimentResult("chains", chains.CHAIN_COLUMNS, [x for r in parts for x in r.rows],
                               {"L": p["L"], "grid": table})
    elif kind == "prop2":
        parts = [chains.prop2_events(L, p["intensity"], p["replicates"], derive_seed(seed, k),
                                     p["c_star"], w) for k, L in enumerate(p["Ls"])]
        res = _merge("prop2", parts, {"per_L": [r.summary for r in parts]})
    elif kind == "mst_longest":
        res = chains.longest_edge_sweep(p["Ls"], p["replicates"], seed, p["intensity"], w)
    else:  # pragma: no cover - parse_spec rejects unknown kinds
        raise SpecError([f"kind: unknown kind {kind!r}"])
    res.spec_fingerprint = spec.fingerprint()
    return res


def run(spec: ExperimentSpec) -> ExperimentResult:
    """Execute ``spec`` and write CSV rows, a JSON summary and a manifest into ``output_dir``.

    A ``<stem>.partial`` marker exists while files are being written and is
    left behind if anything fails.
    """
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = spec.fingerprint()
    stem = f"{spec.kind}-{fp[:12]}"
    marker = out / f"{stem}.partial"
    marker.write_text(json.dumps(spec.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    res = execute(spec)
    csv_path, json_path = res.write(out, stem)
    manifest = {"spec": spec.to_dict(), "spec_fingerprint": fp, "tool_version": __version__,
                "files": {"rows": csv_path.name, "summary": json_path.name},
                "rows_sha256": res.rows_digest(), "n_rows": len(res.rows)}
    (out / f"{stem}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    marker.unlink()
    return res


# --- command line ----------------------------------------------------------

def _parse_overrides(extra: list[str]) -> dict:
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise SpecError([f"unexpected argument {tok!r}"])
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise SpecError([f"{tok}: missing value"]) from None
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="proxnet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment spec")
    p_run.add_argument("spec")
    p_val = sub.add_parser("validate", help="check a spec file without running it")
    p_val.add_argument("spec")
    sub.add_parser("list-kinds", help="list experiment kinds and their parameters")
    sub.add_parser("version", help="print the tool version")
    args, extra = parser.parse_known_args(argv)

    if args.command == "version":
        print(__version__)
        return 0
    if args.command == "list-kinds":
        for kind, schema in SCHEMAS.items():
            params = ", ".join(f"{k}{'*' if p.required else ''}" for k, p in schema.items())
            print(f"{kind}: {params}")
        return 0
    if args.command == "validate":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        try:
            errs = validate(args.spec)
        except OSError as exc:
            print(f"error: cannot read {args.spec}: {exc}", file=sys.stderr)
            return 3
        if errs:
            for e in errs:
                print(f"error: {e}", file=sys.stderr)
            return 2
        print("ok")
        return 0
    try:
        spec = load_spec(args.spec, _parse_overrides(extra))
    except SpecError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read {args.spec}: {exc}", file=sys.stderr)
        return 3
    try:
        res = run(spec)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"kind": res.kind, "rows": len(res.rows), "output_dir": spec.output_dir,
                      "spec_fingerprint": res.spec_fingerprint}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
