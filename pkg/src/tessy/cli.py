"""Command-line surface.

Exit codes follow the usual convention: 0 success, 1 runtime failure,
2 usage error (argparse's default). ``synthesize`` writes every successful
record before reporting failures, so partial corpora survive bad prompts.
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
from pathlib import Path

from .analytics import (
    CorpusVector,
    length_stats,
    mean_pairwise_similarity,
    origin_ratio,
    pca_project,
    render_pca_svg,
    tfidf_vectors,
    word_frequency_table,
)
from .annotation import build_predictor_corpus
from .core import KNOWN_STRATEGIES, Origin, reconstruct
from .dataset_io import (
    audit_records,
    export_sft,
    load_config,
    read_prompts,
    read_records,
    write_records,
)
from .errors import ConfigError, TessyError
from .gateway import CompletionRequest, HttpGateway
from .mock_server import MockFixtureServer, MockServerConfig
from .orchestrator import StrategySelector, run_batch

_TOKENIZER_NOTE = (
    "word statistics use a generic lowercase word tokenizer, not a model "
    "tokenizer; distributions are comparable in shape, not in absolute "
    "token counts"
)


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value
    return overrides


def _cmd_synthesize(args) -> int:
    config = load_config(args.config, _parse_overrides(args.set))
    prompts = read_prompts(args.prompts)
    if args.limit is not None:
        prompts = prompts[: args.limit]
    selector = StrategySelector(
        name=args.strategy, mix_ratio=args.mix_ratio, n_candidates=args.candidates
    )
    outcomes = run_batch(prompts, selector, config,
                         parallelism=args.parallelism, seed=args.seed)
    records = [o.record for o in outcomes if o.record is not None]
    write_records(records, args.out)
    failures = [o for o in outcomes if o.error is not None]
    for outcome in failures:
        print(f"prompt {outcome.prompt_id} failed: {outcome.error}", file=sys.stderr)
    print(f"wrote {len(records)} records to {args.out}"
          + (f"; {len(failures)} prompts failed" if failures else ""))
    return 1 if failures else 0


def _cmd_annotate(args) -> int:
    config = load_config(args.config)
    records = read_records(args.records)
    gateway = HttpGateway(max_inflight=config.max_inflight_requests)
    profile = config.teacher

    def annotate_fn(prompt: str) -> str:
        # The annotation prompt is self-contained; it bypasses the profile's
        # chat template and goes to the endpoint verbatim.
        request = CompletionRequest(
            prompt=prompt,
            max_tokens=config.bulk_block_tokens,
            temperature=profile.sampling.temperature,
            top_p=profile.sampling.top_p,
        )
        return gateway.complete(profile, request).text

    origins = {
        "student": (Origin.STUDENT,),
        "teacher": (Origin.TEACHER,),
        "both": (Origin.STUDENT, Origin.TEACHER),
    }[args.source]
    report = build_predictor_corpus(
        records,
        annotate_fn,
        args.out,
        sample_count=args.samples,
        segment_length_chars=(args.min_chars, args.max_chars),
        origins=origins,
        seed=args.seed,
        parallelism=args.parallelism,
    )
    print(f"wrote {report.written} of {report.requested} segments to {args.out} "
          f"({report.skipped} skipped)")
    return 0


def _resolve_tokenizer(spec: str):
    if spec == "default":
        return None
    if spec.startswith("external:"):
        argv = shlex.split(spec[len("external:"):])
        if not argv:
            raise ConfigError("external tokenizer command is empty")

        def tokenize(text: str) -> list[str]:
            proc = subprocess.run(argv, input=text, capture_output=True,
                                  text=True, check=True)
            return proc.stdout.split()

        return tokenize
    raise ConfigError(f"unknown tokenizer {spec!r} (use default or external:<cmd>)")


def _ratio_or_none(records, unit: str):
    try:
        ratio = origin_ratio(records, unit=unit)
    except ValueError:
        return None
    return {"teacher_fraction": ratio.teacher_fraction,
            "student_fraction": ratio.student_fraction}


def _cmd_analyze(args) -> int:
    paths = [Path(p) for p in args.records.split(",") if p]
    if not paths:
        raise ConfigError("--records expects at least one file")
    tokenizer = _resolve_tokenizer(args.tokenizer)
    corpora = [(path.stem, read_records(path)) for path in paths]
    labels = [label for label, _ in corpora]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"corpus labels collide: {labels}")

    report_dir = Path(args.report)
    report_dir.mkdir(parents=True, exist_ok=True)

    documents = []
    doc_labels: dict[str, str] = {}
    for label, records in corpora:
        for record in records:
            doc_id = f"{label}:{record.id}"
            documents.append((doc_id, reconstruct(record)))
            doc_labels[doc_id] = label

    report: dict = {"tokenizer_note": _TOKENIZER_NOTE, "corpora": {}}
    for label, records in corpora:
        report["corpora"][label] = {
            "records": len(records),
            "origin_ratio_chars": _ratio_or_none(records, "chars"),
            "origin_ratio_words": _ratio_or_none(records, "words"),
        }

    stats = length_stats({label: records for label, records in corpora})
    lines = ["label,count,mean,median,p25,p75,p95,min,max"]
    for label in sorted(stats.per_strategy):
        s = stats.per_strategy[label]
        lines.append(f"{label},{s.count},{s.mean!r},{s.median!r},{s.p25!r},"
                     f"{s.p75!r},{s.p95!r},{s.minimum},{s.maximum}")
    for a, b, diff in stats.mean_differences:
        lines.append(f"mean_difference:{a}-{b},,{diff!r},,,,,,")
    (report_dir / "length_stats.csv").write_text("\n".join(lines) + "\n",
                                                 encoding="utf-8")

    table = word_frequency_table(
        [(label, [reconstruct(r) for r in records]) for label, records in corpora],
        top_k=args.top_k,
        tokenizer=tokenizer,
    )
    (report_dir / "word_frequencies.csv").write_text(table.to_csv(), encoding="utf-8")

    vectorized = tfidf_vectors(documents, tokenizer=tokenizer)
    if len(vectorized.vectors) >= 2 and len(vectorized.terms) >= 2:
        projection = pca_project(vectorized.vectors)
        (report_dir / "pca.svg").write_text(
            render_pca_svg(projection, doc_labels), encoding="utf-8"
        )
        report["pca_explained_variance"] = list(projection.explained_variance)
    else:
        report["pca_explained_variance"] = None

    report["mean_pairwise_similarity"] = None
    if len(corpora) == 2:
        by_position = dict(zip((d for d, _ in documents), vectorized.vectors))
        groups = []
        for label, records in corpora:
            groups.append([
                CorpusVector(doc_id=r.id, entries=by_position[f"{label}:{r.id}"].entries)
                for r in records
            ])
        ids_a = {v.doc_id for v in groups[0]}
        ids_b = {v.doc_id for v in groups[1]}
        if ids_a and ids_a == ids_b and len(ids_a) == len(groups[0]) == len(groups[1]):
            report["mean_pairwise_similarity"] = mean_pairwise_similarity(*groups)

    (report_dir / "report.json").write_text(
        json.dumps(report, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote report to {report_dir}")
    return 0


def _cmd_validate(args) -> int:
    problems = audit_records(args.records)
    for problem in problems:
        print(problem, file=sys.stderr)
    if problems:
        print(f"{args.records}: {len(problems)} problems")
        return 1
    print(f"{args.records}: OK")
    return 0


def _cmd_export(args) -> int:
    count = export_sft(read_records(args.records), args.out)
    print(f"wrote {count} pairs to {args.out}")
    return 0


def _cmd_mock_serve(args) -> int:
    if args.script:
        server_config = MockServerConfig.from_file(args.script)
    else:
        server_config = MockServerConfig(seed=args.seed)
    server = MockFixtureServer(server_config, host=args.host, port=args.port)
    print(f"listening on {server.base_url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tessy",
        description="Synthesize, annotate, and analyze reasoning training data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="run a synthesis strategy over prompts")
    p.add_argument("--strategy", required=True, choices=KNOWN_STRATEGIES)
    p.add_argument("--config", help="config JSON (default: $TESSY_CONFIG)")
    p.add_argument("--prompts", required=True, help="prompts JSONL file")
    p.add_argument("--out", required=True, help="output records JSONL file")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, help="only synthesize the first N prompts")
    p.add_argument("--mix-ratio", type=float, default=0.5,
                   help="teacher probability for teacher-mix")
    p.add_argument("--candidates", type=int, default=5,
                   help="candidate count for reject-sampling")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a top-level config field (value parsed as JSON)")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("annotate", help="build a labeled predictor corpus")
    p.add_argument("--config", help="config JSON (default: $TESSY_CONFIG)")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-chars", type=int, default=200)
    p.add_argument("--max-chars", type=int, default=2000)
    p.add_argument("--source", choices=["student", "teacher", "both"],
                   default="both", help="which origin's think text to sample")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("analyze", help="corpus distribution reports")
    p.add_argument("--records", required=True,
                   help="comma-separated record files; each file is one corpus")
    p.add_argument("--report", required=True, help="output directory")
    p.add_argument("--tokenizer", default="default",
                   help='"default" or "external:<cmd>" (stdin text, stdout tokens)')
    p.add_argument("--top-k", type=int, default=30)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("validate", help="audit a records file against invariants")
    p.add_argument("--records", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("export", help="convert records to prompt/response JSONL")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("mock-serve", help="run the local fixture server")
    p.add_argument("--script", help="scripted-mode JSON file (omit for procedural)")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0,
                   help="procedural-mode seed when no script is given")
    p.set_defaults(func=_cmd_mock_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TessyError, OSError, ValueError,
            subprocess.CalledProcessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
