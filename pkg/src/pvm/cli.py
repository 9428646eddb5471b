"""``pvm`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .audio import AudioError, StftConfig, read_wav
from .curation import (
    LAYOUTS,
    CurationError,
    CorpusScan,
    FilterPolicy,
    build_gender_dependent_layout,
    export_spectrograms,
    scan_corpus,
)
from .gemo.dataset import load_target_dataset
from .gemo.evaluation import (
    class_report_csv,
    evaluate,
    precision_csv,
    render_accuracy_table,
    render_class_report,
    render_precision_table,
)
from .gemo.hierarchy import TARGETS, GemoModelSet
from .gemo.softmax import ModelError, TrainConfig, TrainingError, load_model, save_model, split_dataset, train
from .bench import BenchError
from .library import LibraryError, PresetLibrary
from .pipeline import StreamError
from .tts import TtsError

log = logging.getLogger("pvm")

_TARGET_TITLES = {"gender": "Gender", "male-emotion": "Male-Emotion", "female-emotion": "Female-Emotion"}


def _fail(message: str, code: int = 1) -> int:
    print(f"pvm: error: {message}", file=sys.stderr)
    return code


# --------------------------------------------------------------------------- curate


def cmd_curate(args: argparse.Namespace) -> int:
    layouts = args.layout or ["ravdess-style"]
    if len(layouts) not in (1, len(args.root)):
        return _fail("give one --layout for all roots or one per --root", 2)
    if len(layouts) == 1:
        layouts = layouts * len(args.root)
    policy = FilterPolicy(args.pitch_min, args.pitch_max, args.loud_min, args.loud_max)
    combined = CorpusScan()
    for root, layout in zip(args.root, layouts):
        scan = scan_corpus(root, layout, language=args.language,
                           require_strong_intensity=False if args.no_intensity_filter else None)
        combined.samples.extend(scan.samples)
        combined.rejected.extend(scan.rejected)
    report = build_gender_dependent_layout(combined, args.out, policy, jobs=args.jobs)
    print(json.dumps(report.to_dict(), indent=2))
    if args.png:
        result = export_spectrograms(args.out, StftConfig(), args.png_out)
        print(f"spectrograms: {result.count} written, {result.skipped} skipped -> {result.out}")
    return 0


# --------------------------------------------------------------------------- train / eval


def _train_config(args: argparse.Namespace) -> TrainConfig:
    overrides = {"seed": args.seed, "batch_size": args.batch_size, "optimizer": args.optimizer, "l2": args.l2}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    return TrainConfig.for_target(args.target, **overrides)


def cmd_train(args: argparse.Namespace) -> int:
    config = _train_config(args)
    data = load_target_dataset(args.data, args.target)
    if len(data.y) == 0:
        return _fail(f"no audio found for target {args.target} under {args.data}")
    train_idx, test_idx, val_idx = split_dataset(data.y, config.split, config.seed)
    tr, te, va = data.subset(train_idx), data.subset(test_idx), data.subset(val_idx)
    result = train(tr.x, tr.y, config, labels=data.labels, validation=(va.x, va.y))
    result.model.meta.update({"target": args.target, "split": list(config.split), "samples": len(data.y)})
    save_model(result.model, args.out)
    print(f"trained {args.target}: {len(tr.y)} train / {len(te.y)} test / {len(va.y)} validation samples")
    print(f"loss: initial {result.initial_loss:.4f}, final train {result.final_train_loss:.4f}"
          + (f", validation {result.final_val_loss:.4f}" if result.final_val_loss is not None else ""))
    if te.y:
        print(f"test accuracy: {evaluate(result.model, te.x, te.y).accuracy:.2f}%")
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    target = args.target or model.meta.get("target")
    if target not in TARGETS:
        return _fail("cannot tell which classifier this is; pass --target", 2)
    data = load_target_dataset(args.data, target)
    if args.split == "test":
        seed = int(model.meta.get("seed", 0))
        split = tuple(model.meta.get("split", (60, 20, 20)))
        data = data.subset(split_dataset(data.y, split, seed)[1])
    if not data.y:
        return _fail("evaluation set is empty")
    report = evaluate(model, data.x, data.y)
    title = _TARGET_TITLES[target]
    print(render_class_report(report))
    if target != "gender":
        short = "Male-Emo" if target == "male-emotion" else "Female-Emo"
        print(render_precision_table({short: report}))
    print(render_accuracy_table({title: report}))
    if args.csv:
        Path(args.csv).write_text(class_report_csv(report), encoding="utf-8")
        if target != "gender":
            Path(args.csv).with_suffix(".precision.csv").write_text(precision_csv({title: report}), encoding="utf-8")
        print(f"CSV written to {args.csv}")
    return 0


# --------------------------------------------------------------------------- library


def cmd_lib_build(args: argparse.Namespace) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lib = PresetLibrary.load(args.manifest)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    revoked = sum(1 for e in lib if e.consent.revoked)
    print(f"{len(lib)} entries ({revoked} revoked), languages: {', '.join(sorted(lib.languages)) or '-'}")
    for (language, code), ids in sorted(lib.index.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        print(f"  {language} {code}: {', '.join(ids)}")
    if args.check:
        report = lib.validate(sorted(lib.languages))
        if report.missing_audio:
            return _fail(f"missing audio for {', '.join(report.missing_audio)}")
    return 0


def cmd_lib_validate(args: argparse.Namespace) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lib = PresetLibrary.load(args.manifest)
    languages = [l.strip() for l in args.languages.split(",") if l.strip()]
    report = lib.validate(languages, check_audio=not args.no_audio_check)
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if report.ok else 1


# --------------------------------------------------------------------------- run / bench / match


def _backend(args: argparse.Namespace, lib: Optional[PresetLibrary]):
    from .tts import ExternalTts, MockTts

    if args.tts == "mock":
        return MockTts()
    if not args.tts_cmd:
        raise SystemExit(_fail("--tts external needs --tts-cmd", 2))
    resolve = lib.audio_file if lib is not None else None
    return ExternalTts(args.tts_cmd, timeout=args.tts_timeout, resolve_audio=resolve)


def _load_lib(path: str) -> PresetLibrary:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lib = PresetLibrary.load(path)
    for w in caught:
        log.warning("%s", w.message)
    return lib


def cmd_run(args: argparse.Namespace) -> int:
    from .pipeline import GemoMatcher, load_stream, run_stream, write_stream_outputs

    lib = _load_lib(args.lib)
    models = GemoModelSet.load(args.models)
    segments = load_stream(args.stream)
    backend = _backend(args, lib)
    try:
        result = run_stream(segments, args.lang, args.mode, GemoMatcher(models, lib), backend,
                            keep_going=args.keep_going)
    except StreamError as exc:
        return _fail(str(exc))
    write_stream_outputs(result, args.out)
    s = result.stats
    print(f"{s.segments} segments, aux_runs={s.aux_runs}, tts_runs={s.tts_runs}, "
          f"aux={s.aux_seconds:.3f}s, tts={s.tts_seconds:.3f}s, errors={len(s.errors)} -> {args.out}")
    return 0 if not s.errors else 1


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench import StubMatcher, Workload, bench_pipeline, format_summary, isolated_aux, report_csv, scaling_table
    from .pipeline import GemoMatcher, load_stream

    io_start = time.perf_counter()
    workloads = [Workload(Path(p).stem, load_stream(p)) for p in args.stream]
    io_seconds = time.perf_counter() - io_start
    lib = None
    if args.stub_aux_ms is not None:
        matcher = StubMatcher(args.stub_aux_ms / 1000.0)
    else:
        if not (args.models and args.lib):
            return _fail("bench needs --models and --lib, or --stub-aux-ms", 2)
        lib = _load_lib(args.lib)
        matcher = GemoMatcher(GemoModelSet.load(args.models), lib)
    backend = _backend(args, lib)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    reports = bench_pipeline(workloads, modes, matcher, backend, language=args.lang, reps=args.reps,
                             parallel=args.parallel)
    csv_text = report_csv(reports)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    isolated = None
    if workloads and workloads[0].segments:
        isolated = isolated_aux(matcher, workloads[0].segments[0].audio, args.lang, args.isolated_reps)
    sys.stdout.write(format_summary(reports, isolated))
    print(f"stream loading (I/O) took {io_seconds:.4f}s; I/O-inclusive totals add it once per workload set")
    if args.out:
        side = {
            "io_seconds": io_seconds,
            "scaling": scaling_table(reports),
            "isolated_aux_mean_s": isolated.mean if isolated else None,
            "reports": [{**r.row(), "total_mean_s": r.total.mean,
                         "total_with_io_s": r.total.mean + io_seconds / max(1, len(workloads))} for r in reports],
        }
        Path(args.out).with_suffix(".json").write_text(json.dumps(side, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    clip = read_wav(args.audio)
    if args.server:
        import httpx

        payload = {"language": args.lang, "samples": clip.samples.tolist(), "sample_rate": clip.sample_rate}
        resp = httpx.post(args.server.rstrip("/") + "/match", json=payload, timeout=args.timeout)
        if resp.status_code != 200:
            return _fail(f"server answered {resp.status_code}: {resp.text}")
        print(json.dumps(resp.json(), indent=2))
        return 0
    if not (args.models and args.lib):
        return _fail("match needs --server, or --models and --lib", 2)
    from .pipeline import match_voice

    result = match_voice(GemoModelSet.load(args.models), _load_lib(args.lib), clip, args.lang)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceState, create_app

    lib = _load_lib(args.lib)
    models = GemoModelSet.load(args.models) if args.models else None
    state = ServiceState(lib, models, _backend(args, lib), args.tts)
    uvicorn.run(create_app(state), host=args.host, port=args.port)
    return 0


# --------------------------------------------------------------------------- parser


def _add_tts_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tts", choices=("mock", "external"), default="mock")
    p.add_argument("--tts-cmd", help="command template with {preset_audio} {text} {language} {out}")
    p.add_argument("--tts-timeout", type=float, default=120.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvm", description="Preset-voice matching toolkit")
    parser.add_argument("--version", action="version", version=f"pvm {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", help="filter corpora into the gender/emotion layout")
    p.add_argument("--root", action="append", required=True, help="corpus root (repeatable)")
    p.add_argument("--layout", action="append", choices=LAYOUTS, help="one for all roots, or one per root")
    p.add_argument("--out", required=True)
    p.add_argument("--language", default="en")
    p.add_argument("--no-intensity-filter", action="store_true")
    p.add_argument("--pitch-min", type=float, default=75.0)
    p.add_argument("--pitch-max", type=float, default=3000.0)
    p.add_argument("--loud-min", type=float, default=-23.0)
    p.add_argument("--loud-max", type=float, default=-20.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--png", action="store_true", help="also export spectrogram PNGs")
    p.add_argument("--png-out")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("train", help="train one classifier from a curated layout")
    p.add_argument("--data", required=True)
    p.add_argument("--target", choices=TARGETS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained classifier")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", choices=TARGETS)
    p.add_argument("--split", choices=("test", "all"), default="test")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    lib = sub.add_parser("lib", help="preset-voice library tools")
    lib_sub = lib.add_subparsers(dest="lib_command", required=True)
    p = lib_sub.add_parser("build", help="load and index a library manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--check", action="store_true", help="fail if any preset audio file is missing")
    p.set_defaults(func=cmd_lib_build)
    p = lib_sub.add_parser("validate", help="check cell coverage for target languages")
    p.add_argument("--manifest", default="library.json")
    p.add_argument("--languages", required=True, help="comma-separated, e.g. fr,de")
    p.add_argument("--no-audio-check", action="store_true")
    p.set_defaults(func=cmd_lib_validate)

    p = sub.add_parser("run", help="process a segment stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--lib", required=True)
    p.add_argument("--mode", default="pvm-cached", choices=("pvm-cached", "baseline", "per-utterance-postprocess"))
    p.add_argument("--out", required=True)
    p.add_argument("--keep-going", action="store_true")
    _add_tts_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time aux and TTS stages per mode")
    p.add_argument("--stream", action="append", required=True, help="stream manifest (repeatable)")
    p.add_argument("--modes", default="pvm-cached,baseline")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--lang", default="fr")
    p.add_argument("--models")
    p.add_argument("--lib")
    p.add_argument("--stub-aux-ms", type=float, help="replace the matcher with a fixed-cost stub")
    p.add_argument("--isolated-reps", type=int, default=10)
    p.add_argument("--parallel", action="store_true")
    _add_tts_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("match", help="match one WAV to a preset (locally or via a server)")
    p.add_argument("--audio", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--server", help="base URL of a running `pvm serve`")
    p.add_argument("--models")
    p.add_argument("--lib")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--lib", required=True)
    p.add_argument("--models")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    _add_tts_args(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CurationError, LibraryError, ModelError, TrainingError, AudioError, StreamError, BenchError, TtsError,
            ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
