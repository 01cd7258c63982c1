"""Command-line interface.

Subcommands: ``corpus stats``, ``extract``, ``rank``, ``run``, ``eval``,
``serve``, ``export-rating-sheet``. All corpus-reading commands take
``--root`` and ``--profile`` to locate the dataset.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .answer_extract import ExtractionLimits, extract_candidate_answers
from .errors import FablegenError
from .evaluation import evaluate_systems
from .lingann import get_annotation_backend
from .pipeline import PipelineConfig, get_ranker, run_pipeline
from .ranker import RankedQAPair, RankerInputLayout, score, select_top_n


def _load(args) -> corpus_mod.Corpus:
    return corpus_mod.load_corpus(args.root, args.profile)


def _add_corpus_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--root", required=True, help="corpus root directory")
    parser.add_argument(
        "--profile",
        default="canonical_json",
        choices=["canonical_json", "csv_per_book"],
        help="on-disk corpus layout",
    )


def _cmd_corpus_stats(args) -> int:
    corpus = _load(args)
    stats = corpus_mod.compute_stats(corpus, args.split)
    categories = corpus_mod.category_distribution(corpus, args.split)
    if args.format == "json":
        payload = {
            "split": args.split,
            "stats": stats.as_dict(),
            "categories": {
                e.value: {"count": c, "fraction": f} for e, (c, f) in categories.items()
            },
        }
        print(json.dumps(payload, indent=2))
        return 0
    print(f"split: {args.split}  books: {stats.book_count}  qa_pairs: {stats.qa_count}")
    print(f"{'statistic':<24}{'mean':>10}{'sd':>10}{'min':>8}{'max':>8}")
    for name, d in stats.as_dict().items():
        if name in ("book_count", "qa_count"):
            continue
        print(f"{name:<24}{d['mean']:>10.2f}{d['sd']:>10.2f}{d['min']:>8.0f}{d['max']:>8.0f}")
    print()
    print(f"{'category':<24}{'count':>8}{'fraction':>10}")
    for element, (count, fraction) in categories.items():
        print(f"{element.value:<24}{count:>8}{fraction:>10.3f}")
    return 0


def _cmd_extract(args) -> int:
    corpus = _load(args)
    story = corpus.story(args.book)
    backend = get_annotation_backend(args.annotation_backend)
    limits = ExtractionLimits(max_candidates_per_section=args.max_candidates)
    sections = [story.section(args.section)] if args.section else list(story.sections)
    out = []
    for section in sections:
        for cand in extract_candidate_answers(section, backend, limits):
            out.append({"story_id": story.story_id, **cand.to_dict()})
    if args.json:
        print(json.dumps(out, indent=2, ensure_ascii=False))
    else:
        for cand in out:
            targets = ",".join(cand["target_elements"])
            print(f"s{cand['section_index']:>2} [{cand['source']:<10}] {cand['text']}  ({targets})")
    return 0


def _cmd_rank(args) -> int:
    corpus = _load(args)
    ranker = get_ranker(args.ranker)
    layout = RankerInputLayout()
    by_section: dict[tuple[str, int], list[RankedQAPair]] = {}
    with open(args.pairs, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            story_id = record["story_id"]
            section_index = int(record["section_index"])
            section_text = corpus.section_text(story_id, [section_index])
            pair_score = score(section_text, record["question"], record["answer"], ranker, layout)
            pair = RankedQAPair(
                question=record["question"],
                answer=record["answer"],
                score=pair_score,
                section_index=section_index,
                rank_hint=int(record.get("rank_hint", 0)),
                story_id=story_id,
                system_tag=record.get("system_tag"),
            )
            by_section.setdefault((story_id, section_index), []).append(pair)
    writer = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for key in sorted(by_section):
            for pair in select_top_n(by_section[key], args.top_n):
                writer.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
    finally:
        if args.out:
            writer.close()
    return 0


def _story_iter(args, corpus_holder: list):
    """Yield stories: --book may be one story JSON file or a corpus root."""
    book = Path(args.book)
    if book.is_file():
        data = json.loads(book.read_text(encoding="utf-8"))
        story, pairs = corpus_mod._story_from_dict(data, str(book))
        corpus_holder.append(corpus_mod.Corpus([story], pairs))
        yield story
        return
    corpus = corpus_mod.load_corpus(book, args.profile)
    corpus_holder.append(corpus)
    for story in corpus.stories:
        if args.story and story.story_id != args.story:
            continue
        yield story


def _cmd_run(args) -> int:
    mode = "two_step_baseline" if args.mode == "two_step" else args.mode
    config = PipelineConfig(
        mode=mode,
        top_n=args.top_n,
        qg_backend_id=args.qg_backend
        or ("template_question_first" if mode == "two_step_baseline" else "template"),
        ranker_id=args.ranker,
        workers=args.workers,
    )
    system_tag = args.system_tag or mode
    holder: list = []
    lines = []
    error_count = 0
    for story in _story_iter(args, holder):
        result = run_pipeline(story, config)
        for index in sorted(result.pairs):
            for pair in result.pairs[index]:
                record = pair.to_dict()
                record["system_tag"] = system_tag
                record.pop("provenance", None)
                lines.append(json.dumps(record, ensure_ascii=False))
        for index, message in sorted(result.errors.items()):
            error_count += 1
            print(f"warning: {story.story_id} section {index}: {message}", file=sys.stderr)
    output = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    return 1 if error_count and not lines else 0


def _cmd_eval(args) -> int:
    corpus = corpus_mod.load_corpus(args.gold, args.profile)
    outputs: dict[str, list[dict]] = {}
    referenced: set[str] = set()
    with open(args.pred, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tag = record.get("system_tag") or "system"
            outputs.setdefault(tag, []).append(record)
            referenced.add(record["story_id"])
    if args.split:
        split = corpus_mod.Split.parse(args.split)
    else:
        splits = {corpus.story(s).split for s in referenced if corpus.has_story(s)}
        if len(splits) != 1:
            print("error: predictions span multiple splits; pass --split", file=sys.stderr)
            return 2
        split = splits.pop()
    ns = [int(n) for n in args.n.split(",")]
    report = evaluate_systems(corpus, split, outputs, ns)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_text_table())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    corpus = _load(args)
    config = PipelineConfig(top_n=args.top_n)
    app = create_app(corpus, config, data_dir=args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_export_rating_sheet(args) -> int:
    """Shuffled, source-blinded rating sheet for human evaluation.

    Rows mix ground-truth pairs with each prediction file's pairs; raters see
    three empty rating columns (readability, question relevancy, answer
    relevancy) and never the source system, which lives in the key file.
    """
    corpus = _load(args)
    split = corpus_mod.Split.parse(args.split)
    rows = []
    for pair in corpus.pairs_in_split(split):
        rows.append(
            {
                "story_id": pair.story_id,
                "section_index": pair.section_indices[0],
                "question": pair.question,
                "answer": pair.answer,
                "source": "ground_truth",
            }
        )
    for pred in args.pred or []:
        with open(pred, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                rows.append(
                    {
                        "story_id": record["story_id"],
                        "section_index": int(record["section_index"]),
                        "question": record["question"],
                        "answer": record["answer"],
                        "source": record.get("system_tag") or Path(pred).stem,
                    }
                )
    random.Random(args.seed).shuffle(rows)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "item_id",
                "story_id",
                "section_index",
                "question",
                "answer",
                "readability",
                "question_relevancy",
                "answer_relevancy",
            ]
        )
        for i, row in enumerate(rows, start=1):
            writer.writerow(
                [f"item-{i:04d}", row["story_id"], row["section_index"], row["question"],
                 row["answer"], "", "", ""]
            )
    with open(args.key, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "source"])
        for i, row in enumerate(rows, start=1):
            writer.writerow([f"item-{i:04d}", row["source"]])
    print(f"wrote {len(rows)} rows to {args.out} (key: {args.key})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fablegen")
    sub = parser.add_subparsers(dest="command", required=True)

    corpus_parser = sub.add_parser("corpus", help="corpus inspection")
    corpus_sub = corpus_parser.add_subparsers(dest="corpus_command", required=True)
    stats = corpus_sub.add_parser("stats", help="split statistics and category distribution")
    _add_corpus_args(stats)
    stats.add_argument("--split", default="train")
    stats.add_argument("--format", default="table", choices=["table", "json"])
    stats.set_defaults(func=_cmd_corpus_stats)

    extract = sub.add_parser("extract", help="candidate answers for a book section")
    _add_corpus_args(extract)
    extract.add_argument("--book", required=True, help="story id")
    extract.add_argument("--section", type=int, help="section index (default: all)")
    extract.add_argument("--json", action="store_true", help="emit JSON")
    extract.add_argument("--annotation-backend", default="reference")
    extract.add_argument("--max-candidates", type=int, default=32)
    extract.set_defaults(func=_cmd_extract)

    rank = sub.add_parser("rank", help="score and select top-N pairs from a JSONL file")
    _add_corpus_args(rank)
    rank.add_argument("--pairs", required=True, help="input JSONL of QA pairs")
    rank.add_argument("--top-n", type=int, default=3)
    rank.add_argument("--ranker", default="fallback", help="'fallback' or a saved ranker dir")
    rank.add_argument("--out", help="output JSONL (default: stdout)")
    rank.set_defaults(func=_cmd_rank)

    run = sub.add_parser("run", help="run a QAG pipeline over a book or corpus")
    run.add_argument("--book", required=True, help="story JSON file or corpus root")
    run.add_argument("--profile", default="canonical_json",
                     choices=["canonical_json", "csv_per_book"])
    run.add_argument("--story", help="restrict a corpus root to one story id")
    run.add_argument("--mode", default="three_stage",
                     choices=["three_stage", "two_step", "two_step_baseline"])
    run.add_argument("--top-n", type=int, default=3)
    run.add_argument("--qg-backend")
    run.add_argument("--ranker", default="fallback")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--system-tag")
    run.add_argument("--out", help="output JSONL (default: stdout)")
    run.set_defaults(func=_cmd_run)

    evaluate = sub.add_parser("eval", help="MAP@N report for prediction files")
    evaluate.add_argument("--gold", required=True, help="gold corpus root")
    evaluate.add_argument("--profile", default="canonical_json",
                          choices=["canonical_json", "csv_per_book"])
    evaluate.add_argument("--pred", required=True, help="predictions JSONL")
    evaluate.add_argument("--n", default="1,3,5,10", help="comma-separated N values")
    evaluate.add_argument("--split", help="gold split (default: inferred)")
    evaluate.add_argument("--out", help="write the JSON report here")
    evaluate.set_defaults(func=_cmd_eval)

    serve = sub.add_parser("serve", help="serve the storyteller HTTP API")
    _add_corpus_args(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir", default="data")
    serve.add_argument("--top-n", type=int, default=3)
    serve.add_argument("--ui-dir", help="static UI bundle to mount at /app")
    serve.set_defaults(func=_cmd_serve)

    export = sub.add_parser(
        "export-rating-sheet", help="source-blinded CSV for human evaluation"
    )
    _add_corpus_args(export)
    export.add_argument("--split", default="test")
    export.add_argument("--pred", nargs="*", help="prediction JSONL files to mix in")
    export.add_argument("--out", default="rating_sheet.csv")
    export.add_argument("--key", default="rating_key.csv")
    export.add_argument("--seed", type=int, default=13)
    export.set_defaults(func=_cmd_export_rating_sheet)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FablegenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
