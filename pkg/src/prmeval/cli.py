"""Command-line interface for estimation, evaluation, and analyses.

Every command is a pure function of its input files, flags, and seed:
re-running with identical inputs produces byte-identical output.  The
stochastic subcommands (``analyze bootstrap``, ``analyze budget``) refuse
to run without an explicit ``--seed``.

Exit codes: 0 success; 1 for parse/validation/estimation/metric errors
(including bad flag combinations); 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from typing import Sequence

from . import analysis, corpus, disagreement, metrics
from .errors import PrmError, ValidationError

FORMULAS = """\
definitions (levels i = 0..T; a user deems a result relevant iff its
level is at or above the threshold theta):

  one-sided estimate    p(R|i) = N(U2 relevant & U1 = i) / N(U1 = i)
  symmetric estimate    p(R|i) = [N(U1 rel. & U2 = i) + N(U2 rel. & U1 = i)]
                                 / [N(U2 = i) + N(U1 = i)]
  sigma                 sqrt(p (1 - p) / N_D),  p = N_N / N_D
  binary count          N_R = sum over i >= theta of n_i
  expected count        N_R = sum over i of n_i * p(R|i)
  expected precision@N  expected count over the top N results / N
  DCG@k                 sum over r = 1..k of c(r) * g(i(r))
  nDCG@k                DCG@k / DCG@k of the pool sorted by falling gain
  discounts             log: c(r) = 1/log_b(r+1)    zipf: c(r) = 1/r
  gains                 binary: 1 if i >= theta else 0; linear: i;
                        exponential: 2^i - 1; prm: p(R|i);
                        udm: 0 at level 0, 1 at top, p(R|i) between
"""

_MEASURES = ("count-binary", "count-prm", "precision", "ndcg")
_GAIN_NAMES = ("binary", "linear", "exponential", "prm", "udm", "custom")


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation parameters (config file merged, flags winning)."""

    command: str
    kind: str | None = None
    scale: str | None = None
    qrels: str | None = None
    qrels2: str | None = None
    pairs: str | None = None
    runs: tuple[str, ...] = ()
    theta: int | None = None
    estimator: str = "symmetric"
    condition: str = "u1"
    one_sided_collection: bool = False
    gains: tuple[str, ...] = ()
    custom_gains: str | None = None
    table: str | None = None
    discount: str = "log"
    log_base: float = 2.0
    k: int = 10
    seed: int | None = None
    strata: str | None = None
    override_p0: bool = False
    fmt: str = "text"
    out: str | None = None
    resamples: int = 300
    rounds: int = 50
    budgets: str | None = None
    resource_map: str | None = None
    resource_regex: str | None = None
    measures: tuple[str, ...] = ("ndcg",)
    ideal_pool: str = "qrels"
    strict: bool = False
    tau_variant: str = "b"
    intent_field: bool = False
    intents: str | None = None
    top_intent_only: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        def split(value: str | None, what: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
            if not value:
                return ()
            items = tuple(v.strip() for v in value.split(",") if v.strip())
            for item in items:
                if item not in allowed:
                    raise ValidationError(
                        f"unknown {what} {item!r}; choose from {', '.join(allowed)}"
                    )
            return items

        return cls(
            command=args.command,
            kind=getattr(args, "kind", None),
            scale=args.scale,
            qrels=getattr(args, "qrels", None),
            qrels2=getattr(args, "qrels2", None),
            pairs=getattr(args, "pairs", None),
            runs=tuple(getattr(args, "run", None) or ()),
            theta=getattr(args, "theta", None),
            estimator=getattr(args, "estimator", "symmetric"),
            condition=getattr(args, "condition", "u1"),
            one_sided_collection=getattr(args, "one_sided_collection", False),
            gains=split(getattr(args, "gains", None), "gain scheme", _GAIN_NAMES),
            custom_gains=getattr(args, "custom_gains", None),
            table=getattr(args, "table", None),
            discount=getattr(args, "discount", "log"),
            log_base=getattr(args, "log_base", 2.0),
            k=getattr(args, "k", 10),
            seed=getattr(args, "seed", None),
            strata=getattr(args, "strata", None),
            override_p0=getattr(args, "override_p0", False),
            fmt=getattr(args, "format", "text"),
            out=getattr(args, "out", None),
            resamples=getattr(args, "resamples", 300),
            rounds=getattr(args, "rounds", 50),
            budgets=getattr(args, "budgets", None),
            resource_map=getattr(args, "resource_map", None),
            resource_regex=getattr(args, "resource_regex", None),
            measures=split(getattr(args, "measures", None), "measure", _MEASURES)
            or ("ndcg",),
            ideal_pool=getattr(args, "ideal_pool", "qrels"),
            strict=getattr(args, "strict", False),
            tau_variant=getattr(args, "tau_variant", "b"),
            intent_field=getattr(args, "intent_field", False),
            intents=getattr(args, "intents", None),
            top_intent_only=getattr(args, "top_intent_only", False),
        )


class _Parser(argparse.ArgumentParser):
    # exit 1 on usage errors; exit 2 stays reserved for I/O failures
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_io_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag defaults (flags win)")
    p.add_argument(
        "--format", choices=("text", "csv", "json"), default="text",
        help="output format: text rounds to 4 decimals, csv/json keep full precision",
    )
    p.add_argument("--out", help="write output to this file instead of stdout")


def _add_scale_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scale", help="JSON descriptor of the assessment scale")


def _add_double_judgment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pairs", help="paired judgments: topic doc level_u1 level_u2")
    p.add_argument("--qrels", help="qrels of the first assessor group")
    p.add_argument("--qrels2", help="qrels of the second assessor group")
    p.add_argument(
        "--one-sided-collection", action="store_true",
        help="second round judged only first-round positives; "
        "forbids the symmetric estimator",
    )


def _add_estimator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=int, help="user-relevance threshold (1..T)")
    p.add_argument(
        "--estimator", choices=("symmetric", "one-sided", "all"),
        default="symmetric",
        help="'all' prints the symmetric and both one-sided tables",
    )
    p.add_argument(
        "--condition", choices=("u1", "u2"), default="u1",
        help="conditioning direction for the one-sided estimator",
    )
    p.add_argument(
        "--override-p0", action="store_true",
        help="pin p(R|0) to exactly 0",
    )


def _add_gain_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--gains", default=None,
        help="comma list from: " + ", ".join(_GAIN_NAMES),
    )
    p.add_argument("--custom-gains", help="comma list of per-level gains")
    p.add_argument("--table", help="JSON disagreement table for prm/udm gains")
    p.add_argument("--discount", choices=("log", "zipf"), default="log")
    p.add_argument("--log-base", type=float, default=2.0)
    p.add_argument("--k", type=int, default=10, help="rank cutoff")


def _add_intent_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--intent-field", action="store_true",
        help="read the second qrels column as an intent id "
        "(intent '0' expands to level 0 for every declared intent)",
    )
    p.add_argument("--intents", help="intent sidecar: topic intent probability")
    p.add_argument(
        "--top-intent-only", action="store_true",
        help="keep only each topic's most probable intent",
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog="prmeval",
        description="Disagreement-aware evaluation of ranked retrieval runs.",
        epilog=FORMULAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    sub_map: dict[str, argparse.ArgumentParser] = {}

    est = sub.add_parser(
        "estimate",
        help="estimate p(R|i) from double judgments",
        epilog=FORMULAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_scale_arg(est)
    _add_double_judgment_args(est)
    _add_estimator_args(est)
    _add_intent_args(est)
    est.add_argument("--strata", help="topic->stratum map; estimate per stratum")
    _add_io_args(est)
    sub_map["estimate"] = est

    ev = sub.add_parser(
        "eval",
        help="score runs: counts, expected precision, nDCG@k",
        epilog=FORMULAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_scale_arg(ev)
    ev.add_argument("--qrels", help="qrels used for scoring")
    ev.add_argument("--qrels2", help="second-group qrels (to estimate prm/udm gains)")
    ev.add_argument("--pairs", help="paired judgments (to estimate prm/udm gains)")
    ev.add_argument(
        "--one-sided-collection", action="store_true",
        help="second round judged only first-round positives; "
        "forbids the symmetric estimator",
    )
    ev.add_argument("--run", action="append", help="run file (repeatable)")
    _add_estimator_args(ev)
    _add_gain_args(ev)
    _add_intent_args(ev)
    ev.add_argument(
        "--measures", default=None,
        help="comma list from: " + ", ".join(_MEASURES) + " (default: ndcg)",
    )
    ev.add_argument(
        "--ideal-pool", choices=("qrels", "run"), default="qrels",
        help="pool for the ideal DCG: judged docs plus the run's "
        "unjudged retrieved docs, or the run's own docs only",
    )
    ev.add_argument(
        "--strict", action="store_true",
        help="error on run topics without judgments instead of skipping",
    )
    _add_io_args(ev)
    sub_map["eval"] = ev

    an = sub.add_parser(
        "analyze",
        help="tau | bootstrap | budget | quality | robustness",
        epilog=FORMULAS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    an.add_argument(
        "kind", choices=("tau", "bootstrap", "budget", "quality", "robustness"),
        help="which analysis to run",
    )
    _add_scale_arg(an)
    _add_double_judgment_args(an)
    an.add_argument("--run", action="append", help="run file (repeatable)")
    _add_estimator_args(an)
    _add_gain_args(an)
    _add_intent_args(an)
    an.add_argument("--seed", type=int, help="RNG seed (required when resampling)")
    an.add_argument("--resamples", type=int, default=300, help="bootstrap resamples")
    an.add_argument("--rounds", type=int, default=50, help="simulated annotation rounds")
    an.add_argument("--budgets", help="comma list of double-judgment budgets")
    an.add_argument("--resource-map", help="doc->resource map file")
    an.add_argument(
        "--resource-regex",
        help="regex whose first group extracts the resource from a doc id",
    )
    an.add_argument("--tau-variant", choices=("a", "b"), default="b")
    an.add_argument(
        "--strict", action="store_true",
        help="error on run topics without judgments instead of skipping",
    )
    an.add_argument(
        "--ideal-pool", choices=("qrels", "run"), default="qrels",
    )
    _add_io_args(an)
    sub_map["analyze"] = an

    val = sub.add_parser("validate", help="parse inputs and report, compute nothing")
    _add_scale_arg(val)
    _add_double_judgment_args(val)
    val.add_argument("--run", action="append", help="run file (repeatable)")
    _add_intent_args(val)
    _add_io_args(val)
    sub_map["validate"] = val

    return parser, sub_map


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: bad config JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return {str(k).replace("-", "_"): v for k, v in obj.items()}


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.readlines()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_scale(cfg: RunConfig) -> corpus.RelevanceScale:
    if not cfg.scale:
        raise ValidationError("--scale is required")
    return corpus.parse_scale(_read_text(cfg.scale))


def _load_qrels(
    cfg: RunConfig, path: str, scale: corpus.RelevanceScale, group: str
) -> corpus.JudgmentSet:
    js = corpus.parse_qrels(
        _read_lines(path), scale, group, intent_field=cfg.intent_field
    )
    if cfg.top_intent_only:
        if not cfg.intents:
            raise ValidationError("--top-intent-only needs --intents")
        probs = corpus.parse_intent_probabilities(_read_lines(cfg.intents))
        js = corpus.select_top_intent(js, probs)
    return js


def _load_pairs(
    cfg: RunConfig, scale: corpus.RelevanceScale
) -> list[corpus.JudgmentPair]:
    if cfg.pairs and cfg.qrels2:
        raise ValidationError(
            "double judgments must come from exactly one source: "
            "--pairs or --qrels + --qrels2"
        )
    if cfg.pairs:
        return corpus.parse_paired(_read_lines(cfg.pairs), scale)
    if cfg.qrels and cfg.qrels2:
        u1 = _load_qrels(cfg, cfg.qrels, scale, "u1")
        u2 = _load_qrels(cfg, cfg.qrels2, scale, "u2")
        return list(corpus.pair_judgments(u1, u2).pairs)
    raise ValidationError(
        "no double judgments: supply --pairs or both --qrels and --qrels2"
    )


def _load_runs(cfg: RunConfig) -> list[corpus.RunRanking]:
    if not cfg.runs:
        raise ValidationError("--run is required")
    runs = [corpus.parse_run(_read_lines(path)) for path in cfg.runs]
    ids = [r.system_id for r in runs]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate system ids among runs: {sorted(ids)}")
    return sorted(runs, key=lambda r: r.system_id)


def _theta(cfg: RunConfig) -> int:
    if cfg.theta is None:
        raise ValidationError("--theta is required")
    return cfg.theta


def _estimate_table(
    cfg: RunConfig,
    scale: corpus.RelevanceScale,
    pairs: Sequence[corpus.JudgmentPair],
    estimator: str,
    condition: str,
) -> disagreement.DisagreementTable:
    model = disagreement.UserModel(_theta(cfg))
    if estimator == "symmetric":
        table = disagreement.estimate_symmetric(
            pairs, model, scale, one_sided_collection=cfg.one_sided_collection
        )
    else:
        table = disagreement.estimate_one_sided(
            pairs, model, scale, condition=condition
        )
    if cfg.override_p0:
        table = table.with_override(0, 0.0)
    return table


def _resolve_table(
    cfg: RunConfig, scale: corpus.RelevanceScale
) -> disagreement.DisagreementTable:
    if cfg.table:
        table = disagreement.DisagreementTable.from_json(_read_text(cfg.table))
        if table.scale.labels != scale.labels:
            raise ValidationError(
                f"table scale {table.scale.labels} != --scale {scale.labels}"
            )
        if cfg.override_p0:
            table = table.with_override(0, 0.0)
        return table
    estimator = "symmetric" if cfg.estimator in ("symmetric", "all") else "one_sided"
    pairs = _load_pairs(cfg, scale)
    return _estimate_table(cfg, scale, pairs, estimator, cfg.condition)


def _resolve_scheme(
    name: str,
    cfg: RunConfig,
    scale: corpus.RelevanceScale,
    table: disagreement.DisagreementTable | None,
) -> metrics.GainScheme:
    top = scale.top_index
    if name == "binary":
        return metrics.GainScheme.binary(top, _theta(cfg))
    if name == "linear":
        return metrics.GainScheme.linear(top)
    if name == "exponential":
        return metrics.GainScheme.exponential(top)
    if name == "prm":
        if table is None:
            raise ValidationError("prm gains need --table or double judgments")
        return metrics.GainScheme.prm(table)
    if name == "udm":
        if table is None:
            raise ValidationError("udm gains need --table or double judgments")
        return metrics.GainScheme.udm(table)
    if name == "custom":
        if not cfg.custom_gains:
            raise ValidationError("custom gains need --custom-gains")
        vec = [float(x) for x in cfg.custom_gains.split(",")]
        if len(vec) != top + 1:
            raise ValidationError(
                f"--custom-gains needs {top + 1} values for this scale, got {len(vec)}"
            )
        return metrics.GainScheme.custom(vec)
    raise ValidationError(f"unknown gain scheme {name!r}")


def _table_source_cfg(cfg: RunConfig) -> RunConfig:
    # In analyses that rank against two qrels, --qrels2 is a ranking input,
    # not a double-judgment source; an explicit --pairs wins for the table.
    return replace(cfg, qrels2=None) if cfg.pairs else cfg


def _resolve_discount(cfg: RunConfig) -> metrics.DiscountFunction:
    if cfg.discount == "zipf":
        return metrics.DiscountFunction.zipf()
    return metrics.DiscountFunction.log(cfg.log_base)


def _needs_table(cfg: RunConfig, gains: Sequence[str]) -> bool:
    return (
        any(g in ("prm", "udm") for g in gains)
        or "count-prm" in cfg.measures
        or "precision" in cfg.measures
    )


def _table_text(table: disagreement.DisagreementTable) -> str:
    return table.to_text()


def _table_csv(tables: dict[str, disagreement.DisagreementTable]) -> str:
    lines = ["stratum,estimator,condition,theta,level,label,n_match,n_total,p,sigma,source"]
    for stratum in sorted(tables):
        t = tables[stratum]
        for c in t.cells:
            p = "" if c.p is None else repr(c.p)
            sigma = "" if c.sigma is None else repr(c.sigma)
            cond = t.condition or ""
            lines.append(
                f"{stratum},{t.estimator},{cond},{t.theta},{c.level},"
                f"{t.scale.label(c.level)},{c.n_match},{c.n_total},{p},{sigma},{c.source}"
            )
    return "\n".join(lines) + "\n"


def cmd_estimate(cfg: RunConfig) -> str:
    scale = _load_scale(cfg)
    pairs = _load_pairs(cfg, scale)
    model = disagreement.UserModel(_theta(cfg))

    def estimate_variants(
        subset: Sequence[corpus.JudgmentPair],
    ) -> dict[str, disagreement.DisagreementTable]:
        out: dict[str, disagreement.DisagreementTable] = {}
        if cfg.estimator in ("symmetric", "all"):
            out["symmetric"] = disagreement.estimate_symmetric(
                subset, model, scale, one_sided_collection=cfg.one_sided_collection
            )
        if cfg.estimator == "one-sided":
            out[f"one_sided_{cfg.condition}"] = disagreement.estimate_one_sided(
                subset, model, scale, condition=cfg.condition
            )
        if cfg.estimator == "all":
            for cond in ("u1", "u2"):
                out[f"one_sided_{cond}"] = disagreement.estimate_one_sided(
                    subset, model, scale, condition=cond
                )
        if cfg.override_p0:
            out = {k: t.with_override(0, 0.0) for k, t in out.items()}
        return out

    if cfg.strata:
        strata = corpus.parse_strata(_read_lines(cfg.strata))
        grouped: dict[str, list[corpus.JudgmentPair]] = {}
        missing = {p.topic_id for p in pairs} - set(strata)
        if missing:
            raise ValidationError(f"topics missing from strata map: {sorted(missing)}")
        for p in pairs:
            grouped.setdefault(strata[p.topic_id], []).append(p)
        per_stratum = {s: estimate_variants(grouped[s]) for s in sorted(grouped)}
    else:
        per_stratum = {"all": estimate_variants(pairs)}

    if cfg.fmt == "json":
        payload = {
            stratum: {name: t.to_json_dict() for name, t in variants.items()}
            for stratum, variants in per_stratum.items()
        }
        return _json_dump(payload)
    if cfg.fmt == "csv":
        flat = {
            (f"{stratum}/{name}" if len(per_stratum) > 1 or len(variants) > 1 else stratum): t
            for stratum, variants in per_stratum.items()
            for name, t in variants.items()
        }
        return _table_csv(flat)
    blocks = []
    for stratum, variants in per_stratum.items():
        for name, t in variants.items():
            header = "" if stratum == "all" and len(per_stratum) == 1 else f"# stratum {stratum}\n"
            blocks.append(header + _table_text(t))
    return "\n".join(blocks)


def cmd_eval(cfg: RunConfig) -> str:
    scale = _load_scale(cfg)
    if not cfg.qrels:
        raise ValidationError("--qrels is required")
    judged = _load_qrels(cfg, cfg.qrels, scale, "u1")
    doc_levels = judged.doc_levels()
    gains = cfg.gains or ("binary",)
    table = _resolve_table(cfg, scale) if _needs_table(cfg, gains) else None
    discount = _resolve_discount(cfg)
    runs = _load_runs(cfg) if ("precision" in cfg.measures or "ndcg" in cfg.measures) else []

    pool_reports: dict[str, metrics.MetricReport] = {}
    if "count-binary" in cfg.measures:
        pool_reports["count_binary"] = metrics.binary_count_report(judged, _theta(cfg))
    if "count-prm" in cfg.measures:
        assert table is not None
        pool_reports["count_prm"] = metrics.expected_count_report(judged, table)

    system_reports: dict[str, dict[str, metrics.MetricReport]] = {}
    for run in runs:
        per_run: dict[str, metrics.MetricReport] = {}
        if "precision" in cfg.measures:
            assert table is not None
            report = metrics.expected_precision_report(
                run, doc_levels, table, cfg.k, strict=cfg.strict
            )
            per_run[report.label] = report
        if "ndcg" in cfg.measures:
            for name in gains:
                scheme = _resolve_scheme(name, cfg, scale, table)
                report = metrics.ndcg_at_k(
                    run, doc_levels, scheme, discount, cfg.k,
                    strict=cfg.strict, ideal_pool=cfg.ideal_pool,
                )
                label = "ndcg" if len(gains) == 1 else f"ndcg_{name}"
                report = replace(report, measure=label)
                per_run[report.label] = report
        system_reports[run.system_id] = per_run

    if cfg.fmt == "json":
        payload = {
            "pool": {name: r.to_json_dict() for name, r in pool_reports.items()},
            "systems": {
                system: {label: r.to_json_dict() for label, r in reports.items()}
                for system, reports in system_reports.items()
            },
        }
        return _json_dump(payload)
    if cfg.fmt == "csv":
        lines = ["system,measure,topic,value"]
        for name, r in pool_reports.items():
            lines += [f"pool,{name},{t},{v!r}" for t, v in r.per_topic]
            lines.append(f"pool,{name},all,{r.mean!r}")
            lines.append(f"pool,{name},stderr,{r.stderr_of_mean!r}")
        for system in sorted(system_reports):
            for label in sorted(system_reports[system]):
                r = system_reports[system][label]
                lines += [f"{system},{label},{t},{v!r}" for t, v in r.per_topic]
                lines.append(f"{system},{label},all,{r.mean!r}")
                lines.append(f"{system},{label},stderr,{r.stderr_of_mean!r}")
        return "\n".join(lines) + "\n"
    blocks = []
    for name, r in pool_reports.items():
        blocks.append(r.to_trec_text())
    for system in sorted(system_reports):
        for label in sorted(system_reports[system]):
            r = system_reports[system][label]
            block = f"# run {system}\n" + r.to_trec_text()
            if r.excluded:
                block += f"# excluded_topics {' '.join(r.excluded)}\n"
            blocks.append(block)
    return "\n".join(blocks)


def _analyze_tau(cfg: RunConfig) -> str:
    scale = _load_scale(cfg)
    if not cfg.qrels:
        raise ValidationError("--qrels is required")
    runs = _load_runs(cfg)
    if len(runs) < 2:
        raise ValidationError("need at least 2 --run files")
    gains = cfg.gains or ("binary",)
    if len(gains) != 1:
        raise ValidationError("analyze tau uses exactly one gain scheme")
    table = (
        _resolve_table(_table_source_cfg(cfg), scale)
        if gains[0] in ("prm", "udm")
        else None
    )
    scheme = _resolve_scheme(gains[0], cfg, scale, table)
    discount = _resolve_discount(cfg)
    set_a = _load_qrels(cfg, cfg.qrels, scale, "u1").doc_levels()
    set_b = (
        _load_qrels(cfg, cfg.qrels2, scale, "u2").doc_levels()
        if cfg.qrels2
        else set_a
    )

    def ranking(levels) -> analysis.SystemRanking:
        scores = {
            run.system_id: metrics.ndcg_at_k(
                run, levels, scheme, discount, cfg.k,
                strict=cfg.strict, ideal_pool=cfg.ideal_pool,
            ).mean
            for run in runs
        }
        return analysis.SystemRanking.from_scores(f"ndcg@{cfg.k}", scores)

    rank_a, rank_b = ranking(set_a), ranking(set_b)
    tau = analysis.kendall_tau(rank_a, rank_b, variant=cfg.tau_variant)
    if cfg.fmt == "json":
        return _json_dump(
            {
                "tau": tau,
                "variant": cfg.tau_variant,
                "ranking_u1": [list(s) for s in rank_a.systems],
                "ranking_u2": [list(s) for s in rank_b.systems],
            }
        )
    if cfg.fmt == "csv":
        return f"metric,value\ntau_{cfg.tau_variant},{tau!r}\n"
    return f"tau_{cfg.tau_variant}\t{tau:.4f}\n"


def _analyze_bootstrap(cfg: RunConfig) -> str:
    if cfg.seed is None:
        raise ValidationError("--seed is required: resampling must be reproducible")
    scale = _load_scale(cfg)
    pairs = _load_pairs(cfg, scale)
    results = analysis.bootstrap_topics(
        pairs,
        disagreement.UserModel(_theta(cfg)),
        scale,
        estimator="one_sided" if cfg.estimator == "one-sided" else "symmetric",
        condition=cfg.condition,
        n_resamples=cfg.resamples,
        seed=cfg.seed,
    )
    if cfg.fmt == "json":
        return _json_dump({str(lvl): r.to_json_dict() for lvl, r in results.items()})
    if cfg.fmt == "csv":
        return analysis.bootstrap_to_csv(results)
    lines = []
    for lvl in sorted(results):
        r = results[lvl]
        if r.mean is None:
            lines.append(f"level {lvl}: undefined in all resamples (missing={r.n_missing})")
            continue
        std = "n/a" if r.std is None else f"{r.std:.4f}"
        assert r.quartiles is not None
        q = " ".join(f"{v:.4f}" for v in r.quartiles)
        lines.append(
            f"level {lvl}: mean={r.mean:.4f} std={std} quartiles=[{q}] "
            f"n={len(r.samples)} missing={r.n_missing}"
        )
    return "\n".join(lines) + "\n"


def _curve_text(curve: analysis.SensitivityCurve) -> str:
    lines = []
    for i, x in enumerate(curve.x):
        parts = [f"{curve.x_name}={x}"]
        for s in curve.series:
            if s.means[i] is None:
                parts.append(f"p{s.level}=undef")
            else:
                band = "" if s.stds[i] is None else f"+-{s.stds[i]:.4f}"
                parts.append(f"p{s.level}={s.means[i]:.4f}{band}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _analyze_budget(cfg: RunConfig) -> str:
    if cfg.seed is None:
        raise ValidationError("--seed is required: resampling must be reproducible")
    if not cfg.budgets:
        raise ValidationError("--budgets is required (comma list, e.g. 50,100,200)")
    scale = _load_scale(cfg)
    pairs = _load_pairs(cfg, scale)
    budgets = [int(b) for b in cfg.budgets.split(",") if b.strip()]
    curve = analysis.simulate_annotation_rounds(
        pairs,
        disagreement.UserModel(_theta(cfg)),
        scale,
        budgets,
        n_rounds=cfg.rounds,
        seed=cfg.seed,
        estimator="one_sided" if cfg.estimator == "one-sided" else "symmetric",
        condition=cfg.condition,
    )
    if cfg.fmt == "json":
        return _json_dump(curve.to_json_dict())
    if cfg.fmt == "csv":
        return curve.to_csv()
    return _curve_text(curve)


def _analyze_quality(cfg: RunConfig) -> str:
    scale = _load_scale(cfg)
    if not cfg.qrels:
        raise ValidationError("--qrels is required (reference group judgments)")
    reference = _load_qrels(cfg, cfg.qrels, scale, "u1")
    if cfg.resource_map:
        mapping = corpus.parse_resource_map(_read_lines(cfg.resource_map))
        reference = corpus.attach_resources(reference, resource_map=mapping)
    elif cfg.resource_regex:
        reference = corpus.attach_resources(reference, pattern=cfg.resource_regex)
    else:
        raise ValidationError("supply --resource-map or --resource-regex")
    if not cfg.pairs:
        raise ValidationError("--pairs is required for the quality sweep")
    pairs = corpus.parse_paired(_read_lines(cfg.pairs), scale)
    curve = analysis.quality_sensitivity(
        reference,
        pairs,
        disagreement.UserModel(_theta(cfg)),
        estimator="one_sided" if cfg.estimator == "one-sided" else "symmetric",
        condition=cfg.condition,
    )
    if cfg.fmt == "json":
        return _json_dump(curve.to_json_dict())
    if cfg.fmt == "csv":
        return curve.to_csv()
    return _curve_text(curve)


def _analyze_robustness(cfg: RunConfig) -> str:
    scale = _load_scale(cfg)
    if not (cfg.qrels and cfg.qrels2):
        raise ValidationError("robustness needs --qrels and --qrels2")
    runs = _load_runs(cfg)
    if len(runs) < 2:
        raise ValidationError("need at least 2 --run files")
    gains = cfg.gains or ("binary", "linear", "exponential")
    table = (
        _resolve_table(_table_source_cfg(cfg), scale)
        if any(g in ("prm", "udm") for g in gains)
        else None
    )
    schemes = {name: _resolve_scheme(name, cfg, scale, table) for name in gains}
    set_u1 = _load_qrels(cfg, cfg.qrels, scale, "u1").doc_levels()
    set_u2 = _load_qrels(cfg, cfg.qrels2, scale, "u2").doc_levels()
    taus = analysis.robustness_study(
        runs, set_u1, set_u2, schemes, cfg.k,
        _resolve_discount(cfg), variant=cfg.tau_variant,
    )
    if cfg.fmt == "json":
        return _json_dump({"tau": taus, "variant": cfg.tau_variant, "k": cfg.k})
    if cfg.fmt == "csv":
        lines = ["scheme,tau"]
        lines += [f"{name},{taus[name]!r}" for name in sorted(taus)]
        return "\n".join(lines) + "\n"
    lines = [f"{name}\t{taus[name]:.4f}" for name in sorted(taus)]
    return "\n".join(lines) + "\n"


def cmd_analyze(cfg: RunConfig) -> str:
    handlers = {
        "tau": _analyze_tau,
        "bootstrap": _analyze_bootstrap,
        "budget": _analyze_budget,
        "quality": _analyze_quality,
        "robustness": _analyze_robustness,
    }
    assert cfg.kind is not None
    return handlers[cfg.kind](cfg)


def cmd_validate(cfg: RunConfig) -> str:
    lines = []
    scale = None
    if cfg.scale:
        scale = corpus.parse_scale(_read_text(cfg.scale))
        lines.append(f"ok: scale with {scale.top_index + 1} levels {scale.labels}")
    for label, path in (("qrels", cfg.qrels), ("qrels2", cfg.qrels2)):
        if path:
            if scale is None:
                raise ValidationError("--scale is required to validate qrels")
            group = "u1" if label == "qrels" else "u2"
            js = corpus.parse_qrels(
                _read_lines(path), scale, group, intent_field=cfg.intent_field
            )
            lines.append(
                f"ok: {label} with {len(js)} judgments, {len(js.topics())} topics"
            )
    if cfg.pairs:
        if scale is None:
            raise ValidationError("--scale is required to validate pairs")
        pairs = corpus.parse_paired(_read_lines(cfg.pairs), scale)
        lines.append(f"ok: pairs with {len(pairs)} double judgments")
    for path in cfg.runs:
        run = corpus.parse_run(_read_lines(path))
        lines.append(
            f"ok: run {run.system_id} with {len(run.entries)} entries, "
            f"{len(run.topics())} topics"
        )
    if not lines:
        raise ValidationError("nothing to validate: supply input files")
    return "\n".join(lines) + "\n"


_COMMANDS = {
    "estimate": cmd_estimate,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "validate": cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub_map = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            config = _load_config(args.config)
            unknown = [k for k in config if not hasattr(args, k)]
            if unknown:
                raise ValidationError(
                    f"unknown config keys for '{args.command}': {sorted(unknown)}"
                )
            parser, sub_map = build_parser()
            sub_map[args.command].set_defaults(
                **{k: v for k, v in config.items() if k != "command"}
            )
            args = parser.parse_args(argv)
        cfg = RunConfig.from_args(args)
        _emit(_COMMANDS[cfg.command](cfg), cfg.out)
        return 0
    except SystemExit as exc:
        # argparse --help exits 0; usage errors surface as code 1
        code = exc.code
        return 0 if code in (None, 0) else 1
    except PrmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
