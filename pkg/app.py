import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from attack_sim import AttackSpec, attack
from corpus import build_suite, emulate_profiles
from errors import MalformedWatermark, WatermarkError
from evaluation import SuiteConfig, chart_series, emit_csv, run_suite, summarize
from http_api import serve
from registry import reload, text_digest
from settings import WatermarkSettingsManager, configure_logging
from text_model import KeywordPolicy, normalize, top_words
from watermark_core import ComparisonMode, Watermark

logger = logging.getLogger(__name__)

# Exit codes are a scripting contract
EXIT_OK = 0
EXIT_TAMPERED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

MODES = [mode.value for mode in ComparisonMode]


class CommandError(Exception):
    """Runtime failure outside the watermark error taxonomy (I/O, bad files)"""


def read_document(path: str) -> str:
    """Read UTF-8 text from a file, or stdin for '-'"""
    try:
        data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
        return data.decode("utf-8")
    except OSError as e:
        raise CommandError(f"Cannot read {path}: {e}")
    except UnicodeDecodeError as e:
        raise CommandError(f"{path} is not valid UTF-8: {e}")


def write_output(path: str, content: str):
    if path == "-":
        sys.stdout.write(content)
        return
    try:
        Path(path).write_text(content, encoding="utf-8")
    except OSError as e:
        raise CommandError(f"Cannot write {path}: {e}")


def print_json(payload):
    sys.stdout.write(json.dumps(payload, ensure_ascii=False) + "\n")


def open_registry(settings: Dict, archive: bool = False):
    archive_dir = settings.get("archive_dir") if archive else None
    return reload(settings["registry_path"], archive_dir=archive_dir or None)


def cmd_keyword(args, settings: Dict) -> int:
    """Top-N frequency listing used to pick a keyword"""
    for word, count in top_words(read_document(args.input), args.top):
        sys.stdout.write(f"{word} {count}\n")
    return EXIT_OK


def cmd_embed(args, settings: Dict) -> int:
    """Generate a watermark and register it with the certifying authority"""
    text = read_document(args.input)
    min_count = settings["min_count"]
    policy = KeywordPolicy.explicit(normalize(args.keyword), min_count) if args.keyword is not None else KeywordPolicy.auto(min_count)
    authority = open_registry(settings, archive=True)
    record = authority.register(text, args.author, policy)
    print_json(record.to_dict())
    return EXIT_OK


def cmd_verify(args, settings: Dict) -> int:
    """Compare a document against a registered or supplied watermark"""
    text = read_document(args.input)
    mode = ComparisonMode.parse(settings["comparison_mode"])
    authority = open_registry(settings)
    if args.record_id:
        result = authority.verify(text, record_id=args.record_id, mode=mode)
    else:
        try:
            data = json.loads(args.watermark)
        except json.JSONDecodeError as e:
            raise MalformedWatermark(f"--watermark is not valid JSON: {e}")
        watermark = Watermark.from_dict(data, keyword=normalize(args.keyword))
        result = authority.verify(text, watermark=watermark, mode=mode)
    print_json(result.to_dict())
    return EXIT_TAMPERED if result.tampered else EXIT_OK


def cmd_attack(args, settings: Dict) -> int:
    """Write an attacked copy of a document plus the attack report"""
    text = read_document(args.input)
    base = (
        WatermarkSettingsManager(environ={}).presets[args.preset]
        if args.preset
        else {"insert_ratio": 0.0, "delete_ratio": 0.0, "reorder_ratio": 0.0}
    )
    lexicon = None
    if args.lexicon:
        lexicon = tuple(read_document(args.lexicon).split())
    spec = AttackSpec(
        insert_ratio=args.insert if args.insert is not None else base["insert_ratio"],
        delete_ratio=args.delete if args.delete is not None else base["delete_ratio"],
        reorder_ratio=args.reorder if args.reorder is not None else base["reorder_ratio"],
        seed=args.seed,
        lexicon=lexicon,
    )
    attacked, report = attack(text, spec, instrument_keyword=args.instrument_keyword)
    report_json = json.dumps(report.to_dict()) + "\n"
    write_output(args.output, attacked if attacked.endswith("\n") else attacked + "\n")
    if args.report:
        write_output(args.report, report_json)
    elif args.output == "-":
        sys.stderr.write(report_json)
    else:
        sys.stdout.write(report_json)
    return EXIT_OK


def cmd_evaluate(args, settings: Dict) -> int:
    """Run an experiment suite and emit trial rows as CSV"""
    config = SuiteConfig.from_file(args.config)
    if args.mode:
        config.mode = ComparisonMode.parse(args.mode)
    if args.workers:
        config.max_workers = args.workers
    rows = run_suite(config)
    write_output(args.output, emit_csv(rows))

    if args.chart_dir:
        chart_dir = Path(args.chart_dir)
        chart_dir.mkdir(parents=True, exist_ok=True)
        for keyword, series in chart_series(rows).items():
            write_output(str(chart_dir / f"wdr_{keyword}.csv"), series)
    if args.summary:
        write_output(args.summary, summarize(rows))
    return EXIT_OK


def cmd_owner(args, settings: Dict) -> int:
    """Resolve the original author of a document by earliest registration"""
    digest = args.digest or text_digest(read_document(args.input))
    record = open_registry(settings).settle_dispute(digest)
    print_json(record.to_dict())
    return EXIT_OK


def cmd_corpus(args, settings: Dict) -> int:
    """Build experiment samples and a suite config, or check attacked word counts"""
    if args.emulate:
        print_json(emulate_profiles(seed=args.seed))
        return EXIT_OK
    config_path = build_suite(args.out_dir, seeds=list(range(1, args.seeds + 1)), manifest_path=args.manifest)
    sys.stdout.write(f"{config_path}\n")
    return EXIT_OK


def cmd_serve(args, settings: Dict) -> int:
    """Expose the certifying authority over HTTP"""
    authority = open_registry(settings, archive=True)
    serve(authority, settings["host"], settings["port"], settings["comparison_mode"], settings["min_count"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zwm",
        description="Zero-watermarking for plain-text authentication and tamper detection.",
    )
    parser.add_argument("--log-level", help="Logging level (default from ZWM_LOG_LEVEL or WARNING)")
    parser.add_argument("--env-file", help="Path to a .env file with ZWM_* settings")
    commands = parser.add_subparsers(dest="command", required=True)

    keyword = commands.add_parser("keyword", help="List the most frequent words")
    keyword.add_argument("--input", required=True, help="Document path, or - for stdin")
    keyword.add_argument("--top", type=int, default=10)
    keyword.set_defaults(handler=cmd_keyword)

    embed = commands.add_parser("embed", help="Generate and register a watermark")
    embed.add_argument("--input", required=True)
    embed.add_argument("--author", required=True)
    embed.add_argument("--keyword", help="Keyword to anchor the watermark (default: most frequent word)")
    embed.add_argument("--registry")
    embed.add_argument("--min-count", type=int)
    embed.add_argument("--archive", help="Directory to archive the registered document in")
    embed.set_defaults(handler=cmd_embed)

    verify = commands.add_parser("verify", help="Check a document for tampering")
    verify.add_argument("--input", required=True)
    verify.add_argument("--registry")
    verify.add_argument("--record-id")
    verify.add_argument("--keyword")
    verify.add_argument("--watermark", help='Watermark JSON: {"keyword", "pairs"} or [[p, n], ...]')
    verify.add_argument("--mode", choices=MODES)
    verify.set_defaults(handler=cmd_verify)

    attack_cmd = commands.add_parser("attack", help="Apply a seeded tampering attack")
    attack_cmd.add_argument("--input", required=True)
    attack_cmd.add_argument("--output", default="-")
    attack_cmd.add_argument("--report", help="Write the attack report JSON here")
    attack_cmd.add_argument("--preset", choices=sorted(WatermarkSettingsManager(environ={}).presets))
    attack_cmd.add_argument("--insert", type=float)
    attack_cmd.add_argument("--delete", type=float)
    attack_cmd.add_argument("--reorder", type=float)
    attack_cmd.add_argument("--seed", type=int, default=0)
    attack_cmd.add_argument("--lexicon", help="File of whitespace-separated insertion words")
    attack_cmd.add_argument("--instrument-keyword", help="Count edits touching this keyword's neighborhood")
    attack_cmd.set_defaults(handler=cmd_attack)

    evaluate = commands.add_parser("evaluate", help="Run an attack/verification experiment suite")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--output", default="-")
    evaluate.add_argument("--chart-dir", help="Write per-keyword WDR series here")
    evaluate.add_argument("--summary", help="Write per-keyword summary CSV here")
    evaluate.add_argument("--mode", choices=MODES)
    evaluate.add_argument("--workers", type=int)
    evaluate.set_defaults(handler=cmd_evaluate)

    owner = commands.add_parser("owner", help="Resolve the original author of a document")
    owner.add_argument("--registry")
    source = owner.add_mutually_exclusive_group(required=True)
    source.add_argument("--input")
    source.add_argument("--digest")
    owner.set_defaults(handler=cmd_owner)

    corpus = commands.add_parser("corpus", help="Build experiment samples and a suite config")
    corpus.add_argument("--out-dir", default="corpus")
    corpus.add_argument("--seeds", type=int, default=5)
    corpus.add_argument("--seed", type=int, default=0, help="Attack seed for --emulate")
    corpus.add_argument("--manifest", help="JSON manifest of texts to download instead of synthesizing")
    corpus.add_argument("--emulate", action="store_true", help="Report attacked word counts per profile")
    corpus.set_defaults(handler=cmd_corpus)

    serve_cmd = commands.add_parser("serve", help="Run the HTTP certifying authority")
    serve_cmd.add_argument("--registry")
    serve_cmd.add_argument("--host")
    serve_cmd.add_argument("--port", type=int)
    serve_cmd.add_argument("--mode", choices=MODES)
    serve_cmd.set_defaults(handler=cmd_serve)

    return parser


def check_usage(parser: argparse.ArgumentParser, args):
    if args.command == "verify" and not args.record_id and not (args.keyword and args.watermark):
        parser.error("verify needs --record-id, or --keyword with --watermark")
    if args.command == "keyword" and args.top < 0:
        parser.error("--top must not be negative")
    if args.command == "corpus" and args.seeds < 1:
        parser.error("--seeds must be at least 1")
    if args.command == "evaluate" and args.workers is not None and args.workers < 1:
        parser.error("--workers must be at least 1")


def main(argv: Optional[List[str]] = None) -> int:
    """Main application function"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        check_usage(parser, args)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    manager = WatermarkSettingsManager(env_file=args.env_file)
    settings = manager.resolve({
        "registry_path": getattr(args, "registry", None),
        "archive_dir": getattr(args, "archive", None),
        "comparison_mode": getattr(args, "mode", None),
        "min_count": getattr(args, "min_count", None),
        "host": getattr(args, "host", None),
        "port": getattr(args, "port", None),
        "log_level": args.log_level,
    })
    is_valid, errors = manager.validate_settings(settings)
    if not is_valid:
        for error in errors:
            sys.stderr.write(f"zwm: {error}\n")
        return EXIT_USAGE
    configure_logging(settings["log_level"])

    try:
        return args.handler(args, settings)
    except WatermarkError as e:
        sys.stderr.write(json.dumps(e.to_dict(), ensure_ascii=False) + "\n")
        return EXIT_RUNTIME
    except (CommandError, OSError, ValueError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "detail": str(e)}) + "\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
