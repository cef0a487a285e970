"""Main application entrypoint"""

import argparse
import dataclasses
import logging
import os
import sys

from audio.pitch import estimate_f0
from audio.signal import WindowKind, load_wav, frame_signal
from classifier.evaluate import cross_validate, evaluate_table, format_table
from classifier.mlp import train_mlp
from features.extract import extract_dataset
from features.features import FeatureMatrix, FEATURE_NAMES
from glottal.decomposition import ccd_decompose, write_cycles_csv
from glottal.gci import detect_gci, write_gci_csv
from infotheory.mutual_info import mi_report
from spectra.export import export_spectrogram
from spectra.group_delay import SpectrogramKind, compute_spectrograms
from synth.corpus import make_corpus
from utils.args_config import PipelineConfig
from utils.errors import ToolkitError

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _subset(text: str) -> tuple:
    """Comma-separated feature names, as in the feature CSV header."""
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    unknown = [n for n in names if n not in FEATURE_NAMES]
    if not names or unknown:
        raise argparse.ArgumentTypeError(f"unknown features {unknown}, choose from {','.join(FEATURE_NAMES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    """Command-line interface with one subcommand per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="YAML document overriding the pipeline defaults")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output")
    common.add_argument("--jobs", type=int, default=1, help="Worker count, outputs do not depend on it")
    common.add_argument("--strict-rate", action="store_true", help="Reject audio not sampled at 16 kHz")

    parser = UsageParser(prog="main.py", description="Phase-aware analysis of sustained vowels")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    spectrogram = commands.add_parser("spectrogram", parents=[common], help="Export one spectrogram of a WAV file")
    spectrogram.add_argument("wav", type=str)
    spectrogram.add_argument("--kind", choices=[k.value for k in SpectrogramKind], default="fm")
    spectrogram.add_argument("--out", choices=["csv", "png", "pgm"], default="csv", help="Output format")
    spectrogram.add_argument("-o", "--output", type=str, help="Output path (default <wav name>_<kind>.<format>)")

    gci = commands.add_parser("gci", parents=[common], help="Detect glottal closure instants")
    gci.add_argument("wav", type=str)
    gci.add_argument("-o", "--output", type=str, help="GCI CSV path (default <wav name>_gci.csv)")
    gci.add_argument("--cycles", type=str, help="Also dump the anticausal cycles to this CSV")

    features = commands.add_parser("features", parents=[common], help="Extract the feature table of a manifest")
    features.add_argument("manifest", type=str)
    features.add_argument("--out", type=str, default="features.csv")
    features.add_argument("--allow-partial", action="store_true", help="Keep rows without T1/T2 (left empty)")

    mi = commands.add_parser("mi", parents=[common], help="Normalized mutual information of every feature")
    mi.add_argument("features", type=str)
    mi.add_argument("--pairs", action="store_true", help="Also evaluate every feature pair")
    mi.add_argument("--json", type=str, default="mi_report.json")

    train = commands.add_parser("train", parents=[common], help="Train a classifier on a feature subset")
    train.add_argument("features", type=str)
    train.add_argument("--subset", type=_subset, default=FEATURE_NAMES)
    train.add_argument("--model", type=str, default="model.json")

    evaluate = commands.add_parser("evaluate", parents=[common], help="Cross-validate a feature subset")
    evaluate.add_argument("features", type=str)
    evaluate.add_argument("--subset", type=_subset, default=FEATURE_NAMES)
    evaluate.add_argument("--k", type=int, help="Number of folds")
    evaluate.add_argument("--report", type=str, default="cv_report.json")
    evaluate.add_argument("--roc", type=str, default="roc.csv")
    evaluate.add_argument("--table", action="store_true", help="Evaluate the nine reference subsets instead")

    synth = commands.add_parser("synth", parents=[common], help="Generate a synthetic vowel corpus")
    synth.add_argument("--normo", type=int, required=True)
    synth.add_argument("--patho", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--duration", type=float, default=1.0, help="Seconds per recording")
    synth.add_argument("--out", type=str, required=True)
    return parser


def effective_config(args) -> PipelineConfig:
    """Config document with the command-line overrides applied."""
    config = PipelineConfig.from_yaml(args.config) if args.config else PipelineConfig()
    if args.strict_rate:
        config = dataclasses.replace(config, framing=dataclasses.replace(config.framing, strict_rate=True))
    if getattr(args, "allow_partial", False):
        config = dataclasses.replace(config, features=dataclasses.replace(config.features, allow_partial=True))
    if getattr(args, "k", None):
        config = dataclasses.replace(config, decision=dataclasses.replace(config.decision, k_folds=args.k))
    return config


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def run_spectrogram(args, config: PipelineConfig) -> int:
    """Exports one representation of a recording."""
    framing = config.framing
    signal = load_wav(args.wav, framing.strict_rate, framing.sample_rate)
    frames = frame_signal(signal, framing.frame_ms, framing.hop_ms, WindowKind(framing.window))
    pitch = estimate_f0(signal, framing.frame_ms, framing.hop_ms, config.pitch)
    kind = SpectrogramKind(args.kind)
    spec = compute_spectrograms(frames, pitch, config.modgd, config.cgd, framing.n_fft, args.jobs)[kind]
    output = args.output or f"{_stem(args.wav)}_{kind.value}.{args.out}"
    export_spectrogram(spec, output, args.out, config.config_hash())
    print(f"{kind.name} spectrogram ({spec.n_frames} frames x {spec.n_bins} bins) written to {output}")
    return EXIT_OK


def run_gci(args, config: PipelineConfig) -> int:
    """Writes the GCIs of a recording, and optionally its cycles."""
    framing = config.framing
    signal = load_wav(args.wav, framing.strict_rate, framing.sample_rate)
    pitch = estimate_f0(signal, framing.frame_ms, framing.hop_ms, config.pitch)
    gci = detect_gci(signal, pitch, config.gci)
    output = args.output or f"{_stem(args.wav)}_gci.csv"
    write_gci_csv(gci, output, config.config_hash())
    print(f"{len(gci)} GCIs written to {output}" + (" (no voiced content)" if gci.no_voiced_content else ""))
    if args.cycles:
        result = ccd_decompose(signal, gci, pitch, config.ccd, args.jobs)
        write_cycles_csv(result, args.cycles, config.config_hash())
        print(f"{len(result)} cycles written to {args.cycles}, {len(result.skipped)} skipped")
    return EXIT_OK


def run_features(args, config: PipelineConfig) -> int:
    """Writes the feature table of every manifest recording."""
    dataset = extract_dataset(args.manifest, config, config.features.allow_partial, args.jobs)
    dataset.write_csv(args.out, config.config_hash())
    print(f"{len(dataset)} rows of {len(dataset.patients())} patients written to {args.out}")
    if dataset.dropped:
        print(f"{dataset.dropped} incomplete rows dropped")
    return EXIT_OK


def run_mi(args, config: PipelineConfig) -> int:
    """Prints and saves the normalized MI report."""
    report = mi_report(FeatureMatrix.read_csv(args.features), config.mi.n_bins, args.pairs)
    report.write_json(args.json, config.config_hash())
    print(report.to_text())
    return EXIT_OK


def run_train(args, config: PipelineConfig) -> int:
    """Trains on the whole table and saves the model."""
    data = FeatureMatrix.read_csv(args.features).select(args.subset)
    model = train_mlp(data, config.train)
    model.config_hash = config.config_hash()
    model.save_file(args.model)
    print(f"Model on {','.join(args.subset)} trained on {len(data)} frames, saved to {args.model}")
    return EXIT_OK


def run_evaluate(args, config: PipelineConfig) -> int:
    """Cross-validates one subset, or the nine reference subsets with --table."""
    data = FeatureMatrix.read_csv(args.features)
    k = config.decision.k_folds
    if args.table:
        reports = evaluate_table(data, k, config.train, config.decision, args.jobs)
        print(format_table(reports))
        return EXIT_OK

    report = cross_validate(data, k, config.train, args.subset, config.decision, args.jobs)
    report.write_json(args.report, config.to_dict(), config.config_hash())
    report.roc(config.decision.roc_points).write_csv(args.roc, config.config_hash())
    print(report.to_text())
    return EXIT_OK


def run_synth(args, config: PipelineConfig) -> int:
    """Generates the oracle corpus."""
    manifest = make_corpus(
        args.normo, args.patho, args.seed, args.out, args.duration, args.jobs, config.config_hash()
    )
    print(f"{args.normo + args.patho} recordings written, manifest {manifest}")
    return EXIT_OK


COMMANDS = {
    "spectrogram": run_spectrogram,
    "gci": run_gci,
    "features": run_features,
    "mi": run_mi,
    "train": run_train,
    "evaluate": run_evaluate,
    "synth": run_synth,
}


def dispatch(argv=None) -> int:
    """Runs one command and returns the process exit code.

    Args:
        argv: arguments without the program name, sys.argv[1:] when None
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)

    try:
        config = effective_config(args)
        logger.info("Running %s with config %s", args.command, config.config_hash())
        return COMMANDS[args.command](args, config)
    except (ToolkitError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(dispatch())
