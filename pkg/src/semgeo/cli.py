"""Command-line front end.

Option values resolve as: command-line flag, then environment variable
``SEMGEO_<COMMAND>_<OPTION>`` (e.g. ``SEMGEO_CI_BETA``), then the
``--config`` file, then built-in defaults. The config file is YAML or JSON;
top-level keys apply to every command, a mapping under a command name
applies to that command only.

Exit codes: 0 success, 2 configuration/usage, 3 input data, 4 service.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np
import yaml

from semgeo import concepts
from semgeo.errors import ConfigError, InputError, SemgeoError, ServiceError
from semgeo.geo import DEFAULT_RADII_KM, accuracy_from_errors
from semgeo.hierarchy import build_hierarchy, filter_rare_locations, remap_lenient
from semgeo.inference import (flat_predict, hierarchical_predict, mean_crops,
                              multi_level_cross_entropy)
from semgeo.ingest import formats
from semgeo.ingest.dataset import GeoSample, ParseReport, parse_dataset, write_dataset
from semgeo.ingest.metadata import read_metadata, write_metadata
from semgeo.ingest.netpbm import read_pfm, read_pgm
from semgeo.partitioning import CENTER_MODES, assign_multi, construct_multi
from semgeo.reports import accuracy_report, beta_delta_report, ci_report

log = logging.getLogger("semgeo")

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_SERVICE = 4

COMMANDS = ("build-hierarchy", "build-partitioning", "assign", "evaluate", "ci", "ci-aggregate", "beta-delta")


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except InputError as exc:
            _fail(EXIT_INPUT, str(exc))
        except ServiceError as exc:
            _fail(EXIT_SERVICE, str(exc))
        except SemgeoError as exc:
            _fail(1, str(exc))
        except OSError as exc:
            _fail(EXIT_INPUT, str(exc))
    return wrapper


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _ints(text: str, what: str) -> list[int]:
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{what}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _intervals(text: str) -> list[tuple[float, float]]:
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        sep = ":" if ":" in part else "-"
        try:
            lo, hi = part.split(sep)
            out.append((float(lo), float(hi)))
        except ValueError:
            raise ConfigError(f"bad interval {part!r}; use lo-hi or lo:hi") from None
    return concepts.check_intervals(out)


def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise click.BadParameter(f"cannot load config {path}: {exc}", param_hint="--config")
    if not isinstance(data, dict):
        raise click.BadParameter("config file must hold a mapping", param_hint="--config")
    common = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    out = {}
    for cmd in COMMANDS:
        section = data.get(cmd) or {}
        merged = dict(common)
        merged.update({k.replace("-", "_"): v for k, v in section.items()})
        out[cmd] = {k: (",".join(str(x) for x in v) if isinstance(v, list) else v) for k, v in merged.items()}
    return out


def _read_samples(path, max_errors: int) -> list[GeoSample]:
    report = ParseReport()
    samples = list(parse_dataset(path, report, max_errors))
    if report.skipped:
        click.echo(f"{path}: skipped {report.skipped} malformed rows", err=True)
        for m in report.messages[:10]:
            click.echo(f"  {m}", err=True)
    return samples


def _emit(text: str, path=None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group(context_settings={"show_default": True, "help_option_names": ["-h", "--help"],
                               "auto_envvar_prefix": "SEMGEO"})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="YAML/JSON file with option defaults.")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Semantic geo-partitioning and concept-influence tooling.

    Any option can also be set through the environment as
    SEMGEO_<COMMAND>_<OPTION> (for example SEMGEO_CI_BETA=3) or in the
    --config file. Flags win over the environment, which wins over the
    config file.
    """
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if config_path:
        ctx.default_map = _load_config(config_path)


# -- hierarchy ----------------------------------------------------------------

@cli.command("build-hierarchy")
@click.option("--dataset", required=True, type=click.Path(dir_okay=False), help="Dataset CSV/TSV.")
@click.option("--output", required=True, type=click.Path(dir_okay=False), help="Forest file to write.")
@click.option("--remapped", type=click.Path(dir_okay=False), help="Also write the remapped dataset here.")
@click.option("--tau-initial", default=50, type=click.IntRange(min=1),
              help="Drop locations occurring in fewer samples before building the graph.")
@click.option("--geocode/--no-geocode", default=False, help="Reverse geocode samples that lack an address.")
@click.option("--metadata-out", type=click.Path(dir_okay=False), help="Write location records from geocoding.")
@click.option("--cache-dir", type=click.Path(file_okay=False), help="Reverse-geocode cache directory.")
@click.option("--max-errors", default=1000, type=click.IntRange(min=0), help="Malformed-row budget.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the build report as JSON.")
@handle_errors
def build_hierarchy_cmd(dataset, output, remapped, tau_initial, geocode, metadata_out, cache_dir,
                        max_errors, report_path):
    """Address vectors -> location forest (most frequent parent per location)."""
    samples = _read_samples(dataset, max_errors)
    if not samples:
        raise InputError(f"{dataset}: no samples")
    records = {}
    if geocode:
        from semgeo.ingest.geocoder import GeocoderConfig, NominatimClient

        client = NominatimClient(GeocoderConfig.from_env(cache_dir=cache_dir))
        todo = [i for i, s in enumerate(samples) if s.address is None]
        results = client.reverse_geocode_many([samples[i].coordinate for i in todo])
        failures = 0
        for i, res in zip(todo, results):
            if isinstance(res, Exception):
                failures += 1
                log.warning("geocoding %s failed: %s", samples[i].sample_id, res)
                continue
            samples[i] = GeoSample(samples[i].sample_id, samples[i].coordinate, res.address)
            for r in res.records:
                records.setdefault(r.id, r)
        if failures:
            click.echo(f"geocoding failed for {failures} samples", err=True)
    addresses = filter_rare_locations([s.address or () for s in samples], tau_initial)
    if not any(addresses):
        raise InputError("no sample has an address left after initial filtering")
    build = build_hierarchy(addresses)
    formats.write_forest(output, build.forest)
    if remapped:
        write_dataset(remapped, (GeoSample(s.sample_id, s.coordinate, r)
                                 for s, r in zip(samples, build.remapped) if r is not None))
    if metadata_out and records:
        write_metadata(metadata_out, records.values())
    rep = build.report()
    rep["tau_initial"] = tau_initial
    if report_path:
        Path(report_path).write_text(json.dumps(rep, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(" ".join(f"{k}={v}" for k, v in rep.items()))


# -- partitioning ---------------------------------------------------------------

def _training_set(dataset, forest, max_errors):
    samples = _read_samples(dataset, max_errors)
    paths, coords = [], []
    for s in samples:
        p = remap_lenient(s.address, forest) if s.address else None
        if p is not None:
            paths.append(p)
            coords.append((s.coordinate.lat_deg, s.coordinate.lon_deg))
    if not paths:
        raise InputError(f"{dataset}: no sample maps onto the hierarchy")
    return samples, paths, np.array(coords, dtype=np.float64)


@cli.command("build-partitioning")
@click.option("--dataset", required=True, type=click.Path(dir_okay=False), help="Training dataset with addresses.")
@click.option("--forest", required=True, type=click.Path(dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--taus", default="100,125,250", help="Minimum sample counts, fine to coarse.")
@click.option("--center-mode", default="spherical", type=click.Choice(CENTER_MODES))
@click.option("--metadata", type=click.Path(dir_okay=False), help="Location records (localnames, isarea).")
@click.option("--area-filter/--no-area-filter", default=False,
              help="Only locations with an area geometry may become cells (needs --metadata).")
@click.option("--max-errors", default=1000, type=click.IntRange(min=0))
@handle_errors
def build_partitioning_cmd(dataset, forest, output, taus, center_mode, metadata, area_filter, max_errors):
    """Forest + training samples -> (multi-)partitioning file."""
    tau_list = _ints(taus, "--taus")
    if area_filter and not metadata:
        raise ConfigError("--area-filter needs --metadata")
    tree = formats.read_forest(forest)
    meta = read_metadata(metadata) if metadata else {}
    allowed = None
    if area_filter:
        areas = {k for k, r in meta.items() if r.is_area}
        allowed = areas.__contains__
    _, paths, coords = _training_set(dataset, tree, max_errors)
    mp = construct_multi(tree, paths, coords, tau_list, center_mode=center_mode, allowed=allowed)
    formats.write_partitioning(output, mp, {k: r.localname for k, r in meta.items()})
    click.echo(" ".join(f"tau{p.tau_min}={len(p)}" for p in mp.levels) + f" total={sum(len(p) for p in mp.levels)}")


@cli.command("assign")
@click.option("--dataset", required=True, type=click.Path(dir_okay=False))
@click.option("--forest", required=True, type=click.Path(dir_okay=False))
@click.option("--partitioning", required=True, type=click.Path(dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--max-errors", default=1000, type=click.IntRange(min=0))
@handle_errors
def assign_cmd(dataset, forest, partitioning, output, max_errors):
    """Assign samples to the finest available cell of every level."""
    tree = formats.read_forest(forest)
    mp, _ = formats.read_partitioning(partitioning)
    samples = _read_samples(dataset, max_errors)
    if not samples:
        raise InputError(f"{dataset}: no samples")
    rows = []
    unassigned = [0] * len(mp.levels)
    for s in samples:
        path = remap_lenient(s.address, tree) if s.address else None
        cells = assign_multi(path, mp) if path else [None] * len(mp.levels)
        for i, c in enumerate(cells):
            unassigned[i] += c is None
        rows.append((s.sample_id, cells))
    formats.write_assignments(output, mp.taus, rows)
    click.echo(f"samples={len(rows)} " + " ".join(f"unassigned_tau{t}={u}" for t, u in zip(mp.taus, unassigned)))


# -- evaluation -------------------------------------------------------------------

@cli.command("evaluate")
@click.option("--partitioning", required=True, type=click.Path(dir_okay=False))
@click.option("--probabilities", required=True, type=click.Path(dir_okay=False),
              help="Per-level class probabilities; repeated sample ids (crops) are averaged.")
@click.option("--dataset", required=True, type=click.Path(dir_okay=False), help="Ground-truth coordinates.")
@click.option("--predictions", type=click.Path(dir_okay=False), help="Write per-sample predictions.")
@click.option("--output", type=click.Path(dir_okay=False), help="Write the accuracy table (TSV).")
@click.option("--radii", default=",".join(f"{r:g}" for r in DEFAULT_RADII_KM), help="Radii in km.")
@click.option("--hierarchical/--flat", default=False, help="Also report hierarchical prediction (f*).")
@click.option("--renormalize/--no-renormalize", default=False, help="Rescale probability rows to sum to 1.")
@click.option("--forest", type=click.Path(dir_okay=False), help="With addressed ground truth: report the multi-level loss.")
@click.option("--max-errors", default=1000, type=click.IntRange(min=0))
@handle_errors
def evaluate_cmd(partitioning, probabilities, dataset, predictions, output, radii, hierarchical,
                 renormalize, forest, max_errors):
    """Predict cells from probabilities and report accuracy at each radius."""
    radii_km = _floats(radii, "--radii")
    mp, _ = formats.read_partitioning(partitioning)
    truth = {s.sample_id: s for s in _read_samples(dataset, max_errors)}
    grouped: "OrderedDict[str, list]" = OrderedDict()
    for sid, vecs in formats.read_probabilities(probabilities, mp, renormalize=renormalize):
        grouped.setdefault(sid, []).append(vecs)
    if not grouped:
        raise InputError(f"{probabilities}: no predictions")
    missing = [sid for sid in grouped if sid not in truth]
    if missing:
        raise InputError(f"{len(missing)} predicted samples lack ground truth, e.g. {missing[:3]}")
    tree = formats.read_forest(forest) if forest else None
    modes = [("f", flat_predict)] + ([("f*", hierarchical_predict)] if hierarchical else [])
    out_records = []
    tables = []
    losses = []
    for mode, predict in modes:
        errors = []
        for sid in sorted(grouped):
            probs = mean_crops(grouped[sid]) if len(grouped[sid]) > 1 else grouped[sid][0]
            rec = predict(probs, mp, sample_id=sid).with_ground_truth(truth[sid].coordinate)
            errors.append(rec.gcd_error_km)
            out_records.append((mode, rec))
            if tree is not None and mode == "f" and truth[sid].address:
                path = remap_lenient(truth[sid].address, tree)
                cells = assign_multi(path, mp) if path else [None]
                if all(c is not None for c in cells):
                    losses.append(multi_level_cross_entropy(probs, cells, mp))
        tables.append((mode, accuracy_from_errors(errors, radii_km)))
    if predictions:
        formats.write_predictions(predictions, out_records)
    if output:
        formats.write_accuracy(output, tables)
    click.echo(accuracy_report(tables), nl=False)
    if losses:
        click.echo(f"multi-level cross-entropy: mean={float(np.mean(losses)):.6g} over {len(losses)} samples")


# -- concept influence ------------------------------------------------------------

def _read_labels(path) -> dict:
    names = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read labels {path}: {exc}") from exc
    with fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split(None, 1)
            if len(parts) != 2 or not parts[0].isdigit():
                raise InputError(f"{path}:{n}: expected '<id> <name>'")
            names[int(parts[0])] = parts[1].strip()
    return names


def _ci_job(args):
    sid, exp_path, seg_path, err, k, beta, s_min, names = args
    try:
        e = read_pfm(exp_path)
        seg = read_pgm(seg_path)
    except OSError as exc:
        raise InputError(f"{sid}: cannot read raster: {exc}") from exc
    try:
        return concepts.image_ci_records(sid, e, seg, err, k=k, beta=beta, s_min=s_min, names=names)
    except (InputError, ConfigError) as exc:
        raise type(exc)(f"{sid}: {exc}") from exc


@cli.command("ci")
@click.option("--manifest", required=True, type=click.Path(dir_okay=False),
              help="TSV: sample_id, explanation (.pfm), segmentation (.pgm), gcd_error_km.")
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--k", "k", default=concepts.DEFAULT_K, type=click.IntRange(min=1), help="Top-k pixels.")
@click.option("--beta", default=0, type=click.IntRange(min=0), help="Mask dilation in pixels.")
@click.option("--s-min", default=concepts.DEFAULT_S_MIN, type=click.FloatRange(0, 1, min_open=True),
              help="Minimum relative concept size.")
@click.option("--labels", type=click.Path(dir_okay=False), help="Label id -> concept name file.")
@click.option("--jobs", default=1, type=click.IntRange(min=1), help="Worker processes.")
@handle_errors
def ci_cmd(manifest, output, k, beta, s_min, labels, jobs):
    """Concept influence of every concept in every image of a manifest."""
    items = formats.read_manifest(manifest)
    names = _read_labels(labels) if labels else None
    args = [(sid, e, s, err, k, beta, s_min, names) for sid, e, s, err in items]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_image = list(pool.map(_ci_job, args, chunksize=8))
    else:
        per_image = [_ci_job(a) for a in args]
    records = [r for recs in per_image for r in recs]
    formats.write_ci_records(output, records)
    click.echo(f"images={len(items)} records={len(records)} k={k} beta={beta} s_min={s_min:g}")


@cli.command("ci-aggregate")
@click.option("--records", required=True, type=click.Path(dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False), help="Aggregate table (TSV).")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the text report here.")
@click.option("--intervals", default="0-25,25-750,750-2500", help="Half-open error intervals in km.")
@click.option("--min-images", default=concepts.MIN_IMAGES_HEADLINE, type=click.IntRange(min=1),
              help="Minimum records per (concept, interval); 10 for full tables.")
@click.option("--top", default=10, type=click.IntRange(min=1), help="Concepts per ranking in the text report.")
@click.option("--by", default="median", type=click.Choice(["median", "mean"]))
@handle_errors
def ci_aggregate_cmd(records, output, report_path, intervals, min_images, top, by):
    """Median/mean influence per concept and error interval."""
    ivs = _intervals(intervals)
    recs = formats.read_ci_records(records)
    aggs = concepts.aggregate(recs, ivs, min_images)
    if not aggs:
        click.echo(f"warning: no (concept, interval) group has {min_images} or more images", err=True)
    formats.write_aggregates(output, aggs, meta=[f"min_images={min_images}"])
    text = ci_report(aggs, ivs, top=top, by=by)
    _emit(text, report_path)


@cli.command("beta-delta")
@click.option("--dilated", required=True, type=click.Path(dir_okay=False), help="Aggregates computed with beta > 0.")
@click.option("--plain", required=True, type=click.Path(dir_okay=False), help="Aggregates computed with beta = 0.")
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--common-only/--strict", default=False, help="Ignore keys present in only one input.")
@handle_errors
def beta_delta_cmd(dilated, plain, output, common_only):
    """Difference of median influence between dilated and plain masks."""
    deltas = concepts.beta_delta(formats.read_aggregates(dilated), formats.read_aggregates(plain),
                                 strict=not common_only)
    formats.write_beta_delta(output, deltas)
    click.echo(beta_delta_report(deltas), nl=False)


def main(argv=None):
    cli.main(args=argv, prog_name="semgeo")


if __name__ == "__main__":
    main()
