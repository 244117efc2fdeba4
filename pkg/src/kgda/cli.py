"""Command-line surface for batch operation.

Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed
inputs), 3 runtime failure. Every command ends by printing one
machine-readable JSON summary line to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import discovery
from .corpus import PreprocessConfig, SubCorpus, partition, preprocess, read_raw_docs, read_sentences, write_sentences
from .evaluation import eval_ner_heldout, eval_re_heldout, import_manual, write_manual_sample
from .kg import build_kg, export_kg, load_kg
from .models import PluginError
from .pipeline import CheckpointError, RunConfig, resume, run

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage problems
        raise UsageError(message)


def _summary(command: str, status: str, **fields) -> None:
    print(json.dumps({"command": command, "status": status, **fields},
                     sort_keys=True))


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgda", description=__doc__)
    parser.add_argument("--verbose", action="store_true",
                        help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser) -> None:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dry-run", action="store_true",
                       help="validate inputs and print the plan, write nothing")

    p = sub.add_parser("ingest", help="preprocess raw text into sentences")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=128)
    add_common(p)

    p = sub.add_parser("partition", help="split sentences into sub-corpora")
    p.add_argument("--sentences", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--partitions", type=int, required=True)
    add_common(p)

    p = sub.add_parser("run", help="full iterative adaptation run")
    p.add_argument("--config", help="JSON file of run settings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kg-entities", required=True)
    p.add_argument("--kg-triples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--partitions", type=int, default=None)
    p.add_argument("--heldout", type=int, default=None)
    p.add_argument("--backend", default=None,
                   help="baseline | plugin:<command line>")
    p.add_argument("--ablation", default=None,
                   choices=["none", "no-cumulative", "no-iter"])
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--resume", action="store_true",
                   help="continue from the run directory checkpoint")
    add_common(p)

    p = sub.add_parser("eval", help="re-evaluate checkpointed models held-out")
    p.add_argument("--run", required=True)
    p.add_argument("--kg-entities", required=True)
    p.add_argument("--kg-triples", required=True)
    add_common(p)

    p = sub.add_parser("export", help="rebuild and export the fine graph")
    p.add_argument("--run", required=True)
    p.add_argument("--kg-entities", required=True)
    p.add_argument("--kg-triples", required=True)
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("sample-manual", help="sample discoveries for review")
    p.add_argument("--run", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("-k", type=int, default=50)
    add_common(p)

    p = sub.add_parser("report", help="import judged manual-evaluation CSV")
    p.add_argument("--sample", required=True)
    p.add_argument("--out", default=None)
    add_common(p)
    return parser


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: explicit flags > config file > defaults."""
    data: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    config = RunConfig.from_dict(data)
    for flag, attr in (("seed", "seed"), ("partitions", "partitions"),
                       ("heldout", "heldout"), ("backend", "backend"),
                       ("ablation", "ablation"), ("threads", "threads")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    config.validate()
    return config


def _require_files(*paths: str) -> None:
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")


def _cmd_ingest(args) -> None:
    _require_files(args.corpus)
    cfg = PreprocessConfig(min_len=args.min_len, max_len=args.max_len)
    if args.dry_run:
        _summary("ingest", "ok", dry_run=True, corpus=args.corpus, out=args.out)
        return
    sentences = preprocess(read_raw_docs(args.corpus), cfg)
    write_sentences(sentences, args.out)
    _summary("ingest", "ok", sentences=len(sentences), out=args.out)


def _cmd_partition(args) -> None:
    _require_files(args.sentences)
    sentences = read_sentences(args.sentences)
    seed = args.seed if args.seed is not None else 0
    parts = partition(sentences, args.partitions, seed)
    if args.dry_run:
        _summary("partition", "ok", dry_run=True,
                 sizes=[len(p) for p in parts])
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for part in parts:
        write_sentences(part.sentences, out / f"part_{part.index}.jsonl")
    _summary("partition", "ok", partitions=len(parts),
             sizes=[len(p) for p in parts], out=str(out))


def _cmd_run(args) -> None:
    _require_files(args.corpus, args.kg_entities, args.kg_triples)
    config = _load_run_config(args)
    if args.dry_run:
        _summary("run", "ok", dry_run=True, plan={
            "config": config.to_dict(), "corpus": args.corpus,
            "kg_entities": args.kg_entities, "kg_triples": args.kg_triples,
            "out": args.out, "resume": bool(args.resume),
        })
        return
    result = run(config, args.corpus, args.kg_entities, args.kg_triples,
                 args.out, resume_run=args.resume)
    _summary("run", "ok", **result.summary, out=str(result.out_dir))


def _cmd_eval(args) -> None:
    _require_files(args.run, args.kg_entities, args.kg_triples)
    state, ner_handle, re_handle = resume(args.run)
    kg = load_kg(args.kg_entities, args.kg_triples)
    config = state.config
    heldout_path = Path(args.run) / "partitions" / f"part_{config.heldout_index()}.jsonl"
    _require_files(heldout_path)
    heldout = SubCorpus(index=config.heldout_index(),
                        sentences=read_sentences(heldout_path))
    if args.dry_run:
        _summary("eval", "ok", dry_run=True, heldout=str(heldout_path),
                 sentences=len(heldout))
        return
    ner_report = eval_ner_heldout(ner_handle, heldout, kg)
    re_report = eval_re_heldout(re_handle, heldout, kg,
                                include_negatives=config.include_negative_eval)
    reports_dir = Path(args.run) / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    ner_report.save(reports_dir / "ner_heldout.json")
    re_report.save(reports_dir / "re_heldout.json")
    _summary("eval", "ok", ner_f1=ner_report.f1, re_f1=re_report.f1,
             reports=str(reports_dir))


def _cmd_export(args) -> None:
    _require_files(args.run, args.kg_entities, args.kg_triples)
    state, _, _ = resume(args.run)
    kg = load_kg(args.kg_entities, args.kg_triples)
    config = state.config
    t_conf = discovery.get_confidence_triple(state.pools.triples,
                                             config.th_pt, config.th_ft)
    fine = build_kg(state.t_o, t_conf, kg)
    if args.dry_run:
        _summary("export", "ok", dry_run=True,
                 entities=len(fine.entities), triples=len(fine.triples))
        return
    export_kg(fine, args.out)
    _summary("export", "ok", entities=len(fine.entities),
             triples=len(fine.triples), out=args.out)


def _format_ref(ref) -> str:
    return discovery.ref_str(ref)


def _cmd_sample_manual(args) -> None:
    _require_files(args.run)
    state, _, _ = resume(args.run)
    config = state.config
    e_conf = discovery.get_confidence_entity(state.pools.entities,
                                             config.th_pe, config.th_fe)
    t_conf = discovery.get_confidence_triple(state.pools.triples,
                                             config.th_pt, config.th_ft)
    by_category = {
        "E_conf": [f"{c.surface} ({c.etype})" for c in e_conf],
        "T_R": [f"{_format_ref(c.head)} --{c.rel}--> {_format_ref(c.tail)}"
                for c in t_conf if c.category == discovery.CATEGORY_TR],
        "T_E": [f"{_format_ref(c.head)} --{c.rel}--> {_format_ref(c.tail)}"
                for c in t_conf if c.category == discovery.CATEGORY_TE],
    }
    seed = args.seed if args.seed is not None else state.config.seed
    if args.dry_run:
        _summary("sample-manual", "ok", dry_run=True,
                 sizes={k: len(v) for k, v in by_category.items()})
        return
    write_manual_sample(by_category, args.k, seed, args.out)
    _summary("sample-manual", "ok", k=args.k,
             sizes={k: len(v) for k, v in by_category.items()}, out=args.out)


def _cmd_report(args) -> None:
    _require_files(args.sample)
    reports = import_manual(args.sample)
    payload = {
        category: {"precision": rep.precision, "accepted": rep.accepted,
                   "judged": rep.judged, "unjudged_rows": rep.unjudged_rows}
        for category, rep in sorted(reports.items())
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _summary("report", "ok", categories=payload)


_COMMANDS = {
    "ingest": _cmd_ingest,
    "partition": _cmd_partition,
    "run": _cmd_run,
    "eval": _cmd_eval,
    "export": _cmd_export,
    "sample-manual": _cmd_sample_manual,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    command = args.command
    try:
        _COMMANDS[command](args)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        _summary(command, "error", kind="data", message=str(exc))
        return EXIT_DATA
    except (ValueError, CheckpointError) as exc:
        _summary(command, "error", kind="data", message=str(exc))
        return EXIT_DATA
    except (PluginError, RuntimeError, OSError) as exc:
        _summary(command, "error", kind="runtime", message=str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
