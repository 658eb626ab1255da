"""Command-line pipeline driver.

Subcommands: `simulate` writes per-concentration datasets (optionally with
raw time-tag streams), `estimate` runs the bootstrap rate and affinity
pipelines, `compare` tabulates measured against theoretical per-set noise,
and `ingest-timetags` reduces raw tag streams to a dataset.  Every command
writes a manifest that is itself a loadable config reproducing the run
byte-for-byte.  Exit codes: 0 success, 2 config error, 3 data error,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from ._io import fmt
from .config import (MODES, RunConfig, config_from_kv, config_to_kv,
                     default_config_text)
from .errors import (ConfigError, DomainError, EstimationError, ParseError,
                     StreamOrderError)
from .estimation import (ExperimentDataset, auto_align, estimate_affinity,
                         estimate_ks, read_dataset_csv, write_dataset_csv,
                         write_results_csv, write_run_manifest)
from .kinetics import model_transmission
from .kvconfig import load_kv, write_kv
from .photon_stats import (ProbeModel, sample_transmitted,
                           transmission_std_classical,
                           transmission_std_quantum)
from .rng import NS_DATASET, NS_TIMETAG, substream
from .spr_optics import (analyte_index_trajectory, operating_point,
                         reflectance, system_transmission)
from .timetag import (group_into_sets, match_coincidences, read_timetag_csv,
                      simulate_streams, write_timetag_csv)

COMPARE_CSV_HEADER = ("time_s,dT_measured,dT_quantum_theory,"
                      "dT_classical_theory,enhancement")


def _bin_times(duration_s: float, bin_seconds: float) -> np.ndarray:
    n = int(np.floor(duration_s / bin_seconds + 1e-9))
    return (np.arange(n) + 0.5) * bin_seconds


def transmission_trajectory(cfg: RunConfig, conc: float, params,
                            times: np.ndarray,
                            theta_op: float | None = None) -> np.ndarray:
    """Ground-truth system transmission per bin for one concentration."""
    if times.size == 0:
        return np.zeros(0)
    if cfg.source == "direct":
        return np.atleast_1d(model_transmission(times, cfg.baseline,
                                                params.amplitude, params.ks))
    if theta_op is None:
        theta_op = operating_point(cfg.stack, cfg.drop_fraction)
    occupancy_eq = params.affinity * conc / (1.0 + params.affinity * conc)
    fraction = occupancy_eq * (1.0 - np.exp(-params.ks * times))
    indices = analyte_index_trajectory(fraction, cfg.stack.analyte_index,
                                       cfg.delta_n_max)
    r = np.array([reflectance(cfg.stack.with_analyte_index(float(n)),
                              theta_op) for n in np.atleast_1d(indices)])
    return np.atleast_1d(system_transmission(r, cfg.budget))


def reduce_streams(times_a, times_b, nu: int, window_ps: int,
                   bin_seconds: float, symmetric: bool = False):
    """Match streams, cut heralds into sets of nu and bin the set estimates.

    Returns:
        (bin_times, samples) ready for an ExperimentDataset.
    """
    pairs = match_coincidences(times_a, times_b, window_ps, symmetric)
    counts = group_into_sets(times_a, pairs, nu)
    if counts.size == 0:
        raise DomainError("stream holds fewer heralds than one set")
    starts = np.asarray(times_a)[np.arange(counts.size) * nu]
    bin_ps = int(round(bin_seconds * 1e12))
    bin_idx = (starts // bin_ps).astype(np.int64)
    n_bins = int(bin_idx.max()) + 1
    estimates = counts / nu
    samples = []
    for k in range(n_bins):
        values = estimates[bin_idx == k]
        if values.size == 0:
            raise DomainError(f"bin {k} holds no complete set")
        samples.append(values)
    return _bin_times(n_bins * bin_seconds, bin_seconds), samples


def _simulate_timetag_bin(cfg: RunConfig, transmission: float,
                          bin_index: int, rng):
    ta, tb = simulate_streams(cfg.timetag.herald_rate_hz, transmission,
                              cfg.plan.bin_seconds, rng,
                              jitter_ps=cfg.timetag.jitter_ps,
                              background_rate_hz=cfg.timetag.background_rate_hz)
    offset_ps = bin_index * int(round(cfg.plan.bin_seconds * 1e12))
    offset_ps -= offset_ps % 25
    return ta + offset_ps, tb + offset_ps


def cmd_simulate(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    times = _bin_times(cfg.duration_s, cfg.plan.bin_seconds)
    truths = cfg.concentration_truths()
    theta_op = None
    if cfg.source == "stack" and times.size:
        theta_op = operating_point(cfg.stack, cfg.drop_fraction)
    manifest = config_to_kv(cfg, __version__)
    for ci, (label, conc, params) in enumerate(truths):
        name = f"dataset_{ci}.csv"
        path = os.path.join(cfg.out_dir, name)
        manifest[f"dataset.{ci}.path"] = name
        manifest[f"dataset.{ci}.label"] = label
        manifest[f"dataset.{ci}.ligand_conc"] = fmt(conc)
        if times.size == 0:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("time_s,set_index,T_i\n")
            continue
        trajectory = transmission_trajectory(cfg, conc, params, times,
                                             theta_op)
        rng = substream(cfg.seed, NS_DATASET, ci)
        if cfg.timetag.enabled:
            all_a, all_b = [], []
            for k, t_value in enumerate(trajectory):
                rng_bin = substream(cfg.seed, NS_TIMETAG, ci, k)
                ta, tb = _simulate_timetag_bin(cfg, float(t_value), k,
                                               rng_bin)
                all_a.append(ta)
                all_b.append(tb)
            stream_a = np.concatenate(all_a)
            stream_b = np.concatenate(all_b)
            tag_name = f"timetags_{ci}.csv"
            write_timetag_csv(os.path.join(cfg.out_dir, tag_name),
                              stream_a, stream_b)
            manifest[f"dataset.{ci}.timetags"] = tag_name
            bin_times, samples = reduce_streams(
                stream_a, stream_b, cfg.plan.nu, cfg.timetag.window_ps,
                cfg.plan.bin_seconds)
        else:
            bin_times = times
            samples = []
            for t_value in trajectory:
                counts = sample_transmitted(float(t_value), cfg.plan.nu,
                                            cfg.probe, rng,
                                            size=cfg.plan.mu)
                samples.append(counts / cfg.plan.nu)
        dataset = ExperimentDataset(times=bin_times, samples=samples,
                                    nu=cfg.plan.nu, ligand_conc=conc,
                                    label=label)
        write_dataset_csv(path, dataset)
        print(f"wrote {path}")
    write_kv(os.path.join(cfg.out_dir, "manifest.txt"), manifest)
    return 0


def _dataset_specs(cfg: RunConfig, kv: dict[str, str], config_path: str,
                   positional: list[str]):
    """Resolve (path, ligand_conc, label) triples for estimate/compare."""
    if positional:
        truths = cfg.concentration_truths()
        if len(positional) > len(truths):
            raise ConfigError("more dataset paths than configured recipes")
        return [(p, truths[i][1], truths[i][0])
                for i, p in enumerate(positional)]
    base = os.path.dirname(config_path)
    specs = []
    i = 0
    while f"dataset.{i}.path" in kv:
        specs.append((
            os.path.join(base, kv[f"dataset.{i}.path"]),
            float(kv.get(f"dataset.{i}.ligand_conc", "nan")),
            kv.get(f"dataset.{i}.label", str(i)),
        ))
        i += 1
    if not specs:
        raise ConfigError(
            "no dataset paths given and none recorded in the config")
    return specs


def _load_datasets(cfg: RunConfig, specs) -> list[ExperimentDataset]:
    datasets = []
    for path, conc, label in specs:
        conc_arg = None if np.isnan(conc) else conc
        datasets.append(read_dataset_csv(path, cfg.plan.nu, conc_arg, label))
    return datasets


def _manifest_with_specs(cfg: RunConfig, specs) -> dict[str, str]:
    """Config echo plus the resolved dataset records, so the manifest can
    drive an identical rerun even from another directory."""
    kv = config_to_kv(cfg, __version__)
    for i, (path, conc, label) in enumerate(specs):
        kv[f"dataset.{i}.path"] = os.path.abspath(path)
        kv[f"dataset.{i}.label"] = label
        if not np.isnan(conc):
            kv[f"dataset.{i}.ligand_conc"] = fmt(conc)
    return kv


def cmd_estimate(cfg: RunConfig, kv, config_path: str,
                 positional: list[str]) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    specs = _dataset_specs(cfg, kv, config_path, positional)
    datasets = _load_datasets(cfg, specs)
    offsets = {}
    if cfg.align:
        datasets, offsets = auto_align(datasets, cfg.reference_dataset)
    rows = []
    failures: dict[str, dict[str, int]] = {}
    discards: dict[str, int] = {}
    for mode in cfg.modes():
        mode_name = mode.value
        failures[mode_name] = {}
        ks_estimates = []
        for ds in datasets:
            est = estimate_ks(ds, cfg.bootstrap, mode,
                              surrogate=cfg.classical_surrogate,
                              n_jobs=cfg.threads)
            ks_estimates.append(est)
            rows.append((f"ks[{ds.label}]", mode_name, est.mean, est.std,
                         est.values.size))
            failures[mode_name][ds.label] = est.n_failed
        if len(datasets) >= 3:
            ref = cfg.reference_dataset
            aff = estimate_affinity(
                datasets, ks_estimates[ref].values, cfg.bootstrap, mode,
                reference_index=ref, steady_time_s=cfg.steady_time_s,
                use_raw_steady_state=cfg.use_raw_steady_state,
                surrogate=cfg.classical_surrogate)
            rows.append(("affinity", mode_name, aff.affinity_mean,
                         aff.affinity_std, aff.n_used))
            rows.append(("alpha", mode_name, aff.alpha_mean, aff.alpha_std,
                         aff.n_used))
            rows.append(("ka", mode_name, aff.ka_mean, aff.ka_std,
                         aff.n_used))
            rows.append(("kd", mode_name, aff.kd_mean, aff.kd_std,
                         aff.n_used))
            discards[mode_name] = aff.n_discarded
    results_path = os.path.join(cfg.out_dir, "results.csv")
    write_results_csv(results_path, rows)
    write_run_manifest(os.path.join(cfg.out_dir, "results.json"), {
        "version": __version__,
        "seed": cfg.seed,
        "bootstrap_seed": cfg.bootstrap.rng_seed,
        "config": config_to_kv(cfg, __version__),
        "datasets": [{"path": p, "ligand_conc": c, "label": l}
                     for p, c, l in specs],
        "alignment_offsets": offsets,
        "fit_failures": failures,
        "affinity_discards": discards,
    })
    write_kv(os.path.join(cfg.out_dir, "manifest.txt"),
             _manifest_with_specs(cfg, specs))
    print(f"wrote {results_path}")
    return 0


def cmd_compare(cfg: RunConfig, kv, config_path: str,
                positional: list[str]) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    specs = _dataset_specs(cfg, kv, config_path, positional)
    datasets = _load_datasets(cfg, specs)
    for ci, ds in enumerate(datasets):
        means = ds.bin_means()
        measured = ds.bin_stds()
        theory_q = transmission_std_quantum(np.clip(means, 0.0, 1.0), ds.nu)
        theory_c = transmission_std_classical(np.clip(means, 0.0, 1.0), ds.nu)
        with np.errstate(divide="ignore", invalid="ignore"):
            enh = np.where(measured > 0, theory_c / measured, np.inf)
        path = os.path.join(cfg.out_dir, f"compare_{ci}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(COMPARE_CSV_HEADER + "\n")
            for row in zip(ds.times, measured, theory_q, theory_c, enh):
                fh.write(",".join(fmt(v) for v in row) + "\n")
        print(f"wrote {path}")
    write_kv(os.path.join(cfg.out_dir, "manifest.txt"),
             _manifest_with_specs(cfg, specs))
    return 0


def cmd_ingest(cfg: RunConfig, tag_paths: list[str]) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    times_a, times_b = read_timetag_csv(*tag_paths)
    bin_times, samples = reduce_streams(
        times_a, times_b, cfg.plan.nu, cfg.timetag.window_ps,
        cfg.plan.bin_seconds)
    dataset = ExperimentDataset(times=bin_times, samples=samples,
                                nu=cfg.plan.nu, label="ingested")
    path = os.path.join(cfg.out_dir, "dataset_ingested.csv")
    write_dataset_csv(path, dataset)
    write_kv(os.path.join(cfg.out_dir, "manifest.txt"),
             config_to_kv(cfg, __version__))
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpsense",
        description="Plasmonic binding-kinetics sensing simulator and "
                    "estimator")
    parser.add_argument("--version", action="version",
                        version=f"qpsense {__version__}")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print a complete example config and exit")
    sub = parser.add_subparsers(dest="command")
    for name, extra in (("simulate", None), ("estimate", "datasets"),
                        ("compare", "datasets"),
                        ("ingest-timetags", "timetags")):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="flat key-value run configuration")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--threads", type=int, help="override run.threads")
        sp.add_argument("--out", help="override run.out_dir")
        sp.add_argument("--mode", choices=MODES, help="override run.mode")
        if extra == "datasets":
            sp.add_argument("datasets", nargs="*",
                            help="dataset CSVs (default: paths recorded in "
                                 "the config)")
        if extra == "timetags":
            sp.add_argument("timetags", nargs="+",
                            help="time-tag CSVs, combined or per channel")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return 0
    if args.command is None:
        print("qpsense: error: no subcommand given", file=sys.stderr)
        return 2
    try:
        try:
            kv = load_kv(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        overrides = {
            "run.seed": None if args.seed is None else str(args.seed),
            "run.threads": None if args.threads is None else str(args.threads),
            "run.out_dir": args.out,
            "run.mode": args.mode,
        }
        cfg = config_from_kv(kv, overrides)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, kv, args.config, args.datasets)
        if args.command == "compare":
            return cmd_compare(cfg, kv, args.config, args.datasets)
        return cmd_ingest(cfg, args.timetags)
    except ConfigError as exc:
        print(f"qpsense: config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, StreamOrderError) as exc:
        print(f"qpsense: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"qpsense: data error: {exc}", file=sys.stderr)
        return 3
    except EstimationError as exc:
        print(f"qpsense: estimation failed: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"qpsense: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
