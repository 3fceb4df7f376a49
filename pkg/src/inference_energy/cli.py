"""Command-line entry point: ``inference-energy {fit,simulate,fleet,report,config}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .benchmark_data import BenchmarkParseError, load_benchmarks
from .config import ConfigError, RunConfig, build_fleet, build_scenario, load_config, resolve
from .fleet import beta_breakdown, fleet_report
from .scenario import SampleSet, histogram_csv, log_histogram, mix_regimes, run_scenario, summarize
from .tps_model import fit_models, models_to_document

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_records(path):
    try:
        return load_benchmarks(path)
    except OSError as exc:
        raise DataError(f"cannot read benchmark file {path}: {exc.strerror}") from None
    except BenchmarkParseError as exc:
        raise DataError(f"bad benchmark file {path or '<bundled>'}: {exc}") from None


class Pipeline:
    """Fitted throughput models plus the simulations a config asks for."""

    def __init__(self, config: RunConfig, base_dir: Path, seed: int | None = None, workers: int | None = None):
        self.config = config
        self.base_dir = base_dir
        self.seed = seed
        self.workers = workers or config.workers
        path = resolve(config.benchmark_path, base_dir) if config.benchmark_path else None
        records = _load_records(path)
        self.models = fit_models(records, config.underdetermined)
        self.gpu_counts = {r.model_name: r.tp_size for r in records}
        self._samples: dict[str, SampleSet] = {}

    @property
    def effective_seed(self) -> int:
        return self.config.seed if self.seed is None else self.seed

    def samples(self, name: str) -> SampleSet:
        if name not in self._samples:
            sc = next(s for s in self.config.scenarios if s.name == name)
            try:
                spec = build_scenario(self.config, sc, self.models, self.gpu_counts, self.seed)
            except KeyError as exc:
                raise DataError(f"scenario {name!r}: {exc.args[0]}") from None
            self._samples[name], _ = run_scenario(spec, workers=self.workers)
        return self._samples[name]

    def summaries(self) -> dict:
        out = {}
        for sc in self.config.scenarios:
            s = self.samples(sc.name)
            out[sc.name] = {
                "pooled": summarize(s).as_dict(),
                "members": {m: summarize(s.for_model(m)).as_dict() for m in sc.models if (s.model == m).any()},
            }
        return out

    def fleet(self) -> list[dict]:
        if self.config.fleet is None:
            return []
        spec = build_fleet(self.config)
        reports = []
        for entry in self.config.fleet.entries:
            parts = []
            for part in entry.parts:
                if part.scenario is not None:
                    parts.append((self.samples(part.scenario), part.weight))
                else:
                    path = resolve(part.samples_csv, self.base_dir)
                    try:
                        parts.append((SampleSet.from_csv(path.read_text(encoding="utf-8")), part.weight))
                    except (OSError, ValueError) as exc:
                        raise DataError(f"cannot use samples {path}: {exc}") from None
            mixed = mix_regimes(parts, seed=self.effective_seed, name=entry.name)
            reports.append(asdict(fleet_report(entry.name, float(mixed.energy_wh.mean()), spec)))
        return reports


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


_SUMMARY_FIELDS = ("n", "mean_wh", "p5_wh", "q1_wh", "median_wh", "q3_wh", "p95_wh")
_FLEET_FIELDS = ("scenario", "mean_wh_per_query", "queries_per_day", "beta", "gwh_per_day")


def _summaries_csv(summaries: dict) -> str:
    rows = []
    for scenario, block in summaries.items():
        rows.append([scenario, "pooled", *(block["pooled"][f] for f in _SUMMARY_FIELDS)])
        for member, summ in block["members"].items():
            rows.append([scenario, member, *(summ[f] for f in _SUMMARY_FIELDS)])
    return _csv(("scenario", "member", *_SUMMARY_FIELDS), rows)


def _fleet_csv(reports: list[dict]) -> str:
    return _csv(_FLEET_FIELDS, [[r[f] for f in _FLEET_FIELDS] for r in reports])


def _models_csv(doc: dict) -> str:
    fields = ("model_name", "beta0", "beta1", "beta2", "tps_cap", "n_obs", "method")
    return _csv(fields, [[m[f] for f in fields] for m in doc["models"]])


def _per_scenario_path(path: Path, scenario: str, many: bool) -> Path:
    if not many:
        return path
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in scenario)
    return path.with_name(f"{path.stem}.{safe}{path.suffix}")


def _emit(text: str, destination: str | None):
    if destination:
        Path(destination).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _output_format(args, config: RunConfig | None) -> str:
    return args.format or (config.output.format if config else "text")


def _destination(args, config: RunConfig | None) -> str | None:
    return args.out or (config.output.destination if config else None)


def cmd_fit(args) -> int:
    config = load_config(args.config) if args.config else None
    if args.benchmarks:
        path = Path(args.benchmarks)
    elif config and config.benchmark_path:
        path = resolve(config.benchmark_path, Path(args.config).parent)
    else:
        path = None
    strategy = args.underdetermined or (config.underdetermined if config else "pooled_slopes")
    models = fit_models(_load_records(path), strategy)
    if args.model:
        if args.model not in models:
            raise DataError(f"unknown model {args.model!r}; known: {', '.join(models)}")
        models = {args.model: models[args.model]}
    doc = models_to_document(models)
    text = _models_csv(doc) if _output_format(args, config) == "csv" else _json(doc)
    _emit(text, _destination(args, config))
    return EXIT_OK


def _pipeline(args) -> Pipeline:
    config = load_config(args.config)
    return Pipeline(config, Path(args.config).parent, seed=args.seed, workers=args.workers)


def cmd_simulate(args) -> int:
    pipe = _pipeline(args)
    config = pipe.config
    summaries = pipe.summaries()
    many = len(config.scenarios) > 1
    extra_files = {}
    if args.samples_out:
        for sc in config.scenarios:
            extra_files[_per_scenario_path(Path(args.samples_out), sc.name, many)] = pipe.samples(sc.name).to_csv()
    if args.histogram_out:
        for sc in config.scenarios:
            edges, counts = log_histogram(pipe.samples(sc.name).energy_wh, bins=config.output.histogram_bins)
            extra_files[_per_scenario_path(Path(args.histogram_out), sc.name, many)] = histogram_csv(edges, counts)
    text = _summaries_csv(summaries) if _output_format(args, config) == "csv" else _json({"scenarios": summaries})
    for path, content in extra_files.items():
        path.write_text(content, encoding="utf-8")
    _emit(text, _destination(args, config))
    return EXIT_OK


def cmd_fleet(args) -> int:
    pipe = _pipeline(args)
    if pipe.config.fleet is None or not pipe.config.fleet.entries:
        raise ConfigError(["fleet: no fleet entries configured"])
    reports = pipe.fleet()
    text = _fleet_csv(reports) if _output_format(args, pipe.config) == "csv" else _json({"fleet": reports})
    _emit(text, _destination(args, pipe.config))
    return EXIT_OK


def cmd_report(args) -> int:
    pipe = _pipeline(args)
    config = pipe.config
    models_doc = models_to_document(pipe.models)
    summaries = pipe.summaries()
    reports = pipe.fleet()
    if _output_format(args, config) == "csv":
        sections = [("models", _models_csv(models_doc)), ("scenarios", _summaries_csv(summaries))]
        if reports:
            sections.append(("fleet", _fleet_csv(reports)))
        text = "\n".join(f"# {title}\n{body}" for title, body in sections)
    else:
        doc = {
            "seed": pipe.effective_seed,
            "models": models_doc["models"],
            "scenarios": summaries,
        }
        if config.fleet is not None:
            doc["beta"] = asdict(beta_breakdown(build_fleet(config).components))
            doc["fleet"] = reports
        text = _json(doc)
    if args.samples_out:
        many = len(config.scenarios) > 1
        for sc in config.scenarios:
            _per_scenario_path(Path(args.samples_out), sc.name, many).write_text(pipe.samples(sc.name).to_csv(), encoding="utf-8")
    _emit(text, _destination(args, config))
    return EXIT_OK


def cmd_config(args) -> int:
    """Validate a config and echo it with every default filled in."""
    sys.stdout.write(load_config(args.config).to_yaml())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="inference-energy", description="Monte Carlo estimates of LLM inference energy per query.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, metavar="PATH", help="YAML run configuration")
        p.add_argument("--format", choices=("csv", "text"), help="output format (default: config, else text)")
        p.add_argument("--out", metavar="PATH", help="write the main document here instead of stdout")

    p = sub.add_parser("fit", help="fit throughput models and print coefficients")
    common(p, config_required=False)
    p.add_argument("--benchmarks", metavar="PATH", help="benchmark CSV (default: config, else bundled table)")
    p.add_argument("--model", help="only report this model")
    p.add_argument("--underdetermined", choices=("pooled_slopes", "min_norm"))
    p.set_defaults(func=cmd_fit)

    for name, func, help_ in (
        ("simulate", cmd_simulate, "run the configured scenarios and summarize energy per query"),
        ("fleet", cmd_fleet, "daily fleet energy for the configured fleet entries"),
        ("report", cmd_report, "fit, simulate and fleet in one document"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="sampling threads (results do not depend on this)")
        if name in ("simulate", "report"):
            p.add_argument("--samples-out", metavar="PATH", help="write per-query samples as CSV")
        if name == "simulate":
            p.add_argument("--histogram-out", metavar="PATH", help="write log-binned energy histogram as CSV")
        p.set_defaults(func=func)

    p = sub.add_parser("config", help="validate a config and echo it with defaults filled in")
    p.add_argument("--config", required=True, metavar="PATH")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must lie in [0, 2**64)", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
