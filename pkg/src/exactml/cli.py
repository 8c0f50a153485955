"""Command-line front end.

    exactml --s 4 --t 1 --U 2,2,2,2,2 --reduced
    exactml --fixture swiss --extended --threads 4
    exactml --config job.json --output text

Exit codes: 0 success, 2 invalid configuration, 3 memory/work budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import resource
import sys
import time
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Any, Optional, Sequence

from . import exact_arith as ea
from .coefficients import BlockPartition
from .fixtures import EXTENDED, FIXTURES
from .integrator import (BudgetError, PriorSpec, UNIFORM, bayes_factor, estimate_entry_bytes,
                         mixture_marginal)
from .lattice import monomial_bounds
from .model import (ExponentMatrix, ModelError, ModelSpec, check_data, collapse_data, independence_marginal,
                    normalizing_constant, reduce_matrix)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

# jobs whose upper lattice-point bound exceeds this need --extended
EXTENDED_THRESHOLD = 2 * 10**6

ALGORITHMS = {"recurrence": "fast", "naive": "naive", "streaming": "streaming"}


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    s: Optional[tuple[int, ...]] = None
    t: Optional[tuple[int, ...]] = None
    U: tuple[int, ...] = ()
    reduced: bool = False
    prior: PriorSpec = UNIFORM
    algorithm: str = "recurrence"
    split: Optional[tuple[int, ...]] = None  # contiguous block sizes; None = automatic
    digits: int = 25
    bounds_only: bool = False
    extended: bool = False
    threads: int = 1
    memory_budget: Optional[int] = None  # bytes
    output: str = "json"
    explicit_matrix: Optional[tuple[tuple[int, ...], ...]] = None
    group_sizes: Optional[tuple[int, ...]] = None
    diagnostics: bool = False
    timing_csv: Optional[str] = None

    def validate(self) -> None:
        structured = self.s is not None or self.t is not None
        if structured == (self.explicit_matrix is not None):
            raise ConfigError("give exactly one of (--s, --t) or --explicit-matrix")
        if structured and (self.s is None or self.t is None):
            raise ConfigError("both --s and --t are required")
        if self.explicit_matrix is not None and self.reduced:
            raise ConfigError("--reduced applies to (s, t) models only")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(ALGORITHMS)}")
        if self.output not in ("json", "text"):
            raise ConfigError(f"unknown output format {self.output!r}")
        if self.digits < 1:
            raise ConfigError("--digits must be positive")
        if self.threads < 1:
            raise ConfigError("--threads must be positive")
        if self.memory_budget is not None and self.memory_budget <= 0:
            raise ConfigError("--memory-budget must be positive")


@dataclass
class Report:
    data: dict
    diagnostics: dict = field(default_factory=dict)

    def payload(self, with_diagnostics: bool = False) -> dict:
        out = dict(self.data)
        if with_diagnostics:
            out["diagnostics"] = self.diagnostics
        return out

    def to_json(self, with_diagnostics: bool = False) -> str:
        return _dumps(self.payload(with_diagnostics)) + "\n"

    def to_text(self, with_diagnostics: bool = False) -> str:
        lines: list[str] = []

        def emit(obj, prefix=""):
            if isinstance(obj, dict):
                for k, v in obj.items():
                    if isinstance(v, dict):
                        lines.append(f"{prefix}{k}:")
                        emit(v, prefix + "  ")
                    else:
                        emit_value(k, v, prefix)

        def emit_value(k, v, prefix):
            if isinstance(v, list) and v and isinstance(v[0], list):
                lines.append(f"{prefix}{k}:")
                for row in v:
                    lines.append(prefix + "  " + " ".join(f"{x:>3}" for x in row))
            else:
                lines.append(f"{prefix}{k}: {v}")

        emit(self.payload(with_diagnostics))
        return "\n".join(lines) + "\n"


def _dumps(obj, indent: int = 0) -> str:
    """JSON with two-space indentation, but lists of scalars kept on one line."""
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list) and any(isinstance(x, (list, dict)) for x in obj):
        items = [pad + _dumps(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return json.dumps(obj)


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def _int_list(text, name: str) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        items = text
    else:
        items = [x for x in re.split(r"[,\s]+", str(text).strip()) if x]
    try:
        return tuple(int(x) for x in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected integers, got {text!r}") from exc


def _rat(x, name: str) -> Fraction:
    try:
        return ea.parse_rational(str(x))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: bad rational {x!r}") from exc


def _rat_groups(text, name: str) -> tuple[tuple[Fraction, ...], ...]:
    """'1,2,3;1/2,1,1' or [[1,2,3],["1/2",1,1]] -> groups of rationals."""
    if isinstance(text, (list, tuple)):
        groups = [g if isinstance(g, (list, tuple)) else [g] for g in text]
        if all(not isinstance(g, (list, tuple)) for g in text):
            groups = [list(text)]
    else:
        groups = [[x for x in re.split(r"[,\s]+", g.strip()) if x] for g in str(text).split(";")]
    return tuple(tuple(_rat(x, name) for x in g) for g in groups)


def _matrix_rows(text) -> tuple[tuple[int, ...], ...]:
    if isinstance(text, (list, tuple)):
        return tuple(_int_list(r, "--explicit-matrix") for r in text)
    return tuple(_int_list(r, "--explicit-matrix") for r in str(text).split(";") if r.strip())


def parse_bytes(text) -> int:
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*(\d+)\s*([kKmMgGtT]?)[bB]?\s*", str(text))
    if not m:
        raise ConfigError(f"--memory-budget: cannot parse {text!r}")
    scale = {"": 1, "k": 2**10, "m": 2**20, "g": 2**30, "t": 2**40}[m.group(2).lower()]
    return int(m.group(1)) * scale


def _split(text) -> Optional[tuple[int, ...]]:
    if text is None or (isinstance(text, str) and text.strip().lower() == "auto"):
        return None
    return _int_list(text, "--split")


_FIELD_PARSERS = {
    "s": lambda v: _int_list(v, "s"),
    "t": lambda v: _int_list(v, "t"),
    "U": lambda v: _int_list(v, "U"),
    "split": _split,
    "memory_budget": lambda v: None if v is None else parse_bytes(v),
    "explicit_matrix": lambda v: None if v is None else _matrix_rows(v),
    "group_sizes": lambda v: None if v is None else _int_list(v, "group_sizes"),
    "digits": int,
    "threads": int,
}


def build_config(raw: dict) -> JobConfig:
    """JobConfig from a flat dict of file/flag values (strings or JSON values)."""
    raw = {k.replace("-", "_"): v for k, v in raw.items() if v is not None}
    if "fixture" in raw:
        name = raw.pop("fixture")
        if name not in FIXTURES:
            raise ConfigError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
        s, t, U, reduced = FIXTURES[name]
        raw = {"s": s, "t": t, "U": U, "reduced": reduced, **raw}
        if name in EXTENDED and not raw.get("extended"):
            raise BudgetError(f"fixture {name!r} is long-running; pass --extended")
    prior_block = raw.pop("prior", None)
    if isinstance(prior_block, dict):
        raw.setdefault("prior_variant", prior_block.get("variant", "dirichlet"))
        for key in ("alpha", "beta", "gamma"):
            if key in prior_block:
                raw.setdefault(key, prior_block[key])
    elif prior_block is not None:
        raw.setdefault("prior_variant", prior_block)
    variant = raw.pop("prior_variant", None)
    parts = {key: raw.pop(key) for key in ("alpha", "beta", "gamma") if key in raw}
    if variant in (None, "uniform"):
        if parts and variant == "uniform":
            raise ConfigError("--alpha/--beta/--gamma need --prior dirichlet")
        if parts:
            variant = "dirichlet"
    elif variant != "dirichlet":
        raise ConfigError(f"unknown prior {variant!r}")
    known = {f.name for f in fields(JobConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, val in raw.items():
        parse = _FIELD_PARSERS.get(key)
        try:
            kwargs[key] = parse(val) if parse else val
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    if variant == "dirichlet":
        try:
            alpha = _rat_groups(parts["alpha"], "alpha")[0] if "alpha" in parts else None
            prior = PriorSpec(alpha,
                              _rat_groups(parts["beta"], "beta") if "beta" in parts else None,
                              _rat_groups(parts["gamma"], "gamma") if "gamma" in parts else None)
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc
        kwargs["prior"] = prior
    cfg = JobConfig(**kwargs)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# running a job
# --------------------------------------------------------------------------

def _exact_block(r: Fraction, digits: int) -> dict:
    block = {"exact": ea.format_rational(r), "decimal": ea.format_scientific(r, digits)}
    block["log10"] = ea.log10_of(r, digits) if r > 0 else None
    return block


def _prior_block(prior: PriorSpec) -> dict:
    out: dict[str, Any] = {"variant": prior.variant}
    if not prior.is_uniform:
        if prior.alpha is not None:
            out["alpha"] = [ea.format_rational(x) for x in prior.alpha]
        for name in ("beta", "gamma"):
            val = getattr(prior, name)
            if val is not None:
                out[name] = [[ea.format_rational(x) for x in g] for g in val]
    return out


def _model(config: JobConfig):
    """(A as given, matrix used for integration, data on it, multiplicities, reduced model)."""
    try:
        if config.explicit_matrix is not None:
            A = ExponentMatrix.from_rows(config.explicit_matrix, config.group_sizes)
            U = check_data(A, config.U)
            return A, A, U, None, None
        spec = ModelSpec(config.s, config.t)
        red = spec.reduced()
        if config.reduced:
            U = check_data(red.matrix, config.U)
            return red.matrix, red.matrix, U, red.multiplicities, red
        A = spec.matrix()
        U = check_data(A, config.U)
        # repeated columns share one factor in the integrand, so the raw integral
        # is the same on the reduced matrix with merged counts
        if red.matrix.n < A.n:
            return A, red.matrix, collapse_data(A, U, red), None, red
        return A, A, U, None, red
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc


def _model_block(config: JobConfig, A: ExponentMatrix, red) -> dict:
    out: dict[str, Any] = {}
    if config.explicit_matrix is None:
        spec = ModelSpec(config.s, config.t)
        out["s"] = list(spec.s)
        out["t"] = list(spec.t)
        out["d"] = spec.d
        out["n"] = spec.n
        out["n_reduced"] = spec.n_reduced
        out["dimension"] = spec.dimension
    else:
        out["explicit"] = True
        out["d"] = A.d
        out["n"] = A.n
        out["group_sizes"] = [ti + 1 for ti in A.t]
    out["A"] = A.rows() if config.explicit_matrix is not None else ModelSpec(config.s, config.t).matrix().rows()
    if red is not None:
        out["A_reduced"] = red.matrix.rows()
        out["multiplicities"] = list(red.multiplicities)
    else:
        ared = reduce_matrix(A)
        if ared.matrix.n < A.n:
            out["A_reduced"] = ared.matrix.rows()
            out["multiplicities"] = list(ared.multiplicities)
    return out


def bounds_only(config: JobConfig) -> dict:
    """Lattice-point count and monomial bounds for the job, without integrating."""
    _, Awork, Uwork, _, _ = _model(config)
    rep = monomial_bounds(Awork, Uwork)
    return {"lattice_points": rep.lattice_count, "lower": rep.lower_bound, "upper": rep.upper_bound,
            "unimodular": rep.unimodular, "independent_subsets": rep.independent_subsets}


def run(config: JobConfig) -> Report:
    config.validate()
    t0 = time.perf_counter()
    A, Awork, Uwork, mult, red = _model(config)
    U = check_data(A, config.U)
    data: dict[str, Any] = {"model": _model_block(config, A, red)}
    data["data"] = {"U": list(U), "N": sum(U), "reduced": config.reduced}
    data["prior"] = _prior_block(config.prior)
    bounds = bounds_only(config)
    data["bounds"] = bounds
    diag: dict[str, Any] = {"bounds_seconds": round(time.perf_counter() - t0, 3)}
    if config.bounds_only:
        return Report(data, _finish_diag(diag, t0))
    if bounds["upper"] > EXTENDED_THRESHOLD and not config.extended:
        raise BudgetError(f"up to {bounds['upper']} lattice points; pass --extended for long-running jobs",
                          bounds["upper"])
    const = normalizing_constant(U, mult)
    data["normalizing_constant"] = str(const)
    try:
        indep = independence_marginal(A, U, mult, beta=config.prior.beta, include_constant=False)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    data["independence"] = {"raw": _exact_block(indep, config.digits),
                            "marginal": _exact_block(indep * const, config.digits)}
    partition = BlockPartition.contiguous(config.split) if config.split else None
    if partition is not None:
        partition.validate(Awork.n)
    t1 = time.perf_counter()
    try:
        result = mixture_marginal(Awork, Uwork, config.prior, partition=partition,
                                  method=ALGORITHMS[config.algorithm], threads=config.threads,
                                  memory_budget=config.memory_budget)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    diag["integral_seconds"] = round(time.perf_counter() - t1, 3)
    raw = result.exact
    data["mixture"] = {
        "raw": _exact_block(raw, config.digits),
        "marginal": _exact_block(raw * const, config.digits),
        "term_count": result.term_count,
        "algorithm": config.algorithm,
        "partition": [len(b) for b in result.partition.blocks] if result.partition else None,
    }
    data["bayes_factor"] = _exact_block(bayes_factor(Awork, Uwork, config.prior, mixture=result),
                                        config.digits)
    if config.memory_budget is not None:
        data["memory_budget"] = config.memory_budget
    diag["entry_bytes_estimate"] = estimate_entry_bytes(sum(U))
    return Report(data, _finish_diag(diag, t0))


def _finish_diag(diag: dict, t0: float) -> dict:
    diag["total_seconds"] = round(time.perf_counter() - t0, 3)
    diag["peak_rss_kb"] = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return diag


def _write_timing(path: str, config: JobConfig, report: Report) -> None:
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["N", "n", "algorithm", "threads", "partition", "total_seconds", "peak_rss_kb"])
        part = report.data.get("mixture", {}).get("partition")
        w.writerow([report.data["data"]["N"], len(config.U), config.algorithm, config.threads,
                    "+".join(map(str, part)) if part else "", report.diagnostics.get("total_seconds"),
                    report.diagnostics.get("peak_rss_kb")])


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exactml",
                                description="Exact marginal likelihoods for independence and mixture models.")
    p.add_argument("--config", help="JSON job file; flags given on the command line override it")
    p.add_argument("--fixture", help=f"preset data set: {', '.join(sorted(FIXTURES))}")
    p.add_argument("--s", help="comma-separated s_1..s_k")
    p.add_argument("--t", help="comma-separated t_1..t_k")
    p.add_argument("--U", help="comma-separated data vector")
    p.add_argument("--reduced", action="store_true", default=None,
                   help="U is indexed by the columns of the reduced matrix")
    p.add_argument("--prior", choices=["uniform", "dirichlet"], dest="prior_variant")
    p.add_argument("--alpha", help="two mixture-weight parameters, e.g. 1,1/2")
    p.add_argument("--beta", help="first-component parameters, groups separated by ';'")
    p.add_argument("--gamma", help="second-component parameters, groups separated by ';'")
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS))
    p.add_argument("--split", help="'auto' or contiguous block sizes, e.g. 8,8")
    p.add_argument("--digits", type=int, help="significant digits of decimal output (default 25)")
    p.add_argument("--bounds-only", action="store_true", default=None)
    p.add_argument("--extended", action="store_true", default=None, help="allow long-running jobs")
    p.add_argument("--threads", type=int)
    p.add_argument("--memory-budget", help="bytes, optionally with K/M/G suffix")
    p.add_argument("--output", choices=["json", "text"])
    p.add_argument("--explicit-matrix", help="rows separated by ';', entries by ','")
    p.add_argument("--group-sizes", help="row counts of the groups of an explicit matrix")
    p.add_argument("--diagnostics", action="store_true", default=None,
                   help="include timing and memory figures in the report (makes it non-deterministic)")
    p.add_argument("--timing-csv", help="append a timing row to this CSV file")
    p.add_argument("-o", "--out", help="write the report here instead of stdout")
    return p


def config_from_args(argv: Sequence[str]) -> tuple[JobConfig, Optional[str]]:
    args = make_parser().parse_args(argv)
    raw: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "out")}
    raw.update(flags)
    return build_config(raw), args.out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config, out = config_from_args(argv)
        report = run(config)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"exactml: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, MemoryError) as exc:
        est = getattr(exc, "estimate", None)
        extra = f" (estimate: {est})" if est is not None else ""
        print(f"exactml: budget exceeded: {exc}{extra}", file=sys.stderr)
        return EXIT_BUDGET
    text = report.to_json(config.diagnostics) if config.output == "json" else report.to_text(config.diagnostics)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if config.timing_csv:
        _write_timing(config.timing_csv, config, report)
    if not config.diagnostics:
        d = report.diagnostics
        print(f"exactml: {d.get('total_seconds')} s, peak RSS {d.get('peak_rss_kb')} kB", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
