"""Command-line orchestration: phantom -> degrade -> metrics / radiomics
-> train -> evaluate -> compare.

Global flags: --config <json> --seed <u64> --out <dir> --workers <n>
--log <level>. Exit codes: 0 success, 2 config error, 3 data error,
4 numerical failure. Rerunning any command with identical inputs and
seed produces byte-identical primary outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import degrade as deg
from .errors import ConfigError, DataError, DosekitError
from .features import ORIGINAL_VARIANT, FeatureMatrix, load_features, save_features
from .metrics import (
    EmbedderSpec,
    PatchSet,
    center_crop_patches,
    embed_patches,
    fid,
    gaussian_stats,
    kid,
    mae,
    ms_ssim,
    ssim,
)
from .ml.pipeline import TrainingConfig, load_model, run_training, save_model
from .phantom import generate_phantom, load_dataset_spec, thorax_spec
from .preprocess import PreprocessConfig, clip_window, normalize_unit, preprocess_volume
from .projection import ProjectionGeometry
from .radiomics import ExtractionConfig, PerturbationSpec, extract_all, feature_schema, perturb_roi
from .radiomics.extract import schema_hash
from .report import read_json, violin_svg, write_json, write_series_csv
from .rng import derive_rng, derive_seed
from .stats import METRIC_NAMES, BootstrapResult, bootstrap_metrics, compare_methods
from .volume import (
    CtVolume,
    DatasetManifest,
    IntensityUnit,
    ManifestRecord,
    NoduleMask,
    load_manifest,
    load_mask,
    load_volume,
    save_manifest,
    save_mask,
    save_volume,
)

log = logging.getLogger("dosekit")

PERTURBATION_VARIANTS = ("dilate", "erode", "contour_noise")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config root must be an object")
    return cfg


def _preprocess_config(cfg: dict) -> PreprocessConfig:
    sec = cfg.get("preprocess", {})
    return PreprocessConfig(
        hu_slope=sec.get("hu_slope", 1.0),
        hu_intercept=sec.get("hu_intercept", -1024.0),
        window_lo=sec.get("window_lo", -1200.0),
        window_hi=sec.get("window_hi", 600.0),
        gaussian_kernel=tuple(sec.get("gaussian_kernel", (3, 3, 3))),
        gaussian_sigma=sec.get("gaussian_sigma", 0.5),
        target_spacing=tuple(sec.get("target_spacing", (1.0, 1.0, 1.0))),
    )


def _degrade_config(cfg: dict, seed: int) -> deg.DegradeConfig:
    sec = cfg.get("degrade", {})
    pre = _preprocess_config(cfg)
    geometry = None
    if "geometry" in sec:
        g = sec["geometry"]
        geometry = ProjectionGeometry(
            n_angles=int(g["n_angles"]),
            n_detectors=int(g["n_detectors"]),
            detector_spacing=float(g.get("detector_spacing", 1.0)),
            assume_in_circle=bool(g.get("assume_in_circle", True)),
        )
    simple = deg.SimpleNoiseParams(**sec.get("simple", {}))
    physics = deg.PhysicsNoiseParams(**sec.get("physics", {}))
    return deg.DegradeConfig(
        method=sec.get("method", deg.METHOD_PHYSICS),
        geometry=geometry,
        simple=simple,
        physics=physics,
        window=(pre.window_lo, pre.window_hi),
        mu_water_mm=sec.get("mu_water_mm", deg.MU_WATER_MM),
        seed=seed,
    )


def _canonical_degrade_config(cfg: deg.DegradeConfig) -> str:
    payload = {
        "method": cfg.method,
        "geometry": None
        if cfg.geometry is None
        else [cfg.geometry.n_angles, cfg.geometry.n_detectors,
              cfg.geometry.detector_spacing, cfg.geometry.assume_in_circle],
        "simple": [cfg.simple.I0_ld, cfg.simple.m_e, cfg.simple.sigma_e2,
                   cfg.simple.epsilon_floor],
        "physics": [cfg.physics.a, cfg.physics.N0A, cfg.physics.Ne],
        "window": list(cfg.window),
        "mu_water_mm": cfg.mu_water_mm,
        "seed": cfg.seed,
    }
    return json.dumps(payload, sort_keys=True)


# ---------------------------------------------------------------------------
# phantom
# ---------------------------------------------------------------------------


def cmd_phantom(args) -> int:
    spec = load_dataset_spec(args.spec)
    out = Path(args.out)
    records = []
    n_nodules = 0
    for i in range(spec["n_subjects"]):
        subject = f"s{i:03d}"
        sub_seed = derive_seed(args.seed, "phantom", subject)
        pspec = thorax_spec(
            dims=spec["dims"],
            spacing=spec["spacing"],
            n_benign=spec["benign_per_subject"],
            n_malignant=spec["malignant_per_subject"],
            seed=sub_seed,
        )
        volume, masks = generate_phantom(pspec, seed=sub_seed)
        vol_path = out / "volumes" / f"{subject}.vol"
        save_volume(volume, vol_path)
        mask_paths = []
        for mask in masks:
            mpath = out / "masks" / f"{subject}_{mask.nodule_id}.vol"
            save_mask(mask, mpath)
            mask_paths.append(str(mpath.relative_to(out)))
        n_nodules += len(masks)
        records.append(
            ManifestRecord(
                subject_id=subject,
                volume_path=str(vol_path.relative_to(out)),
                mask_paths=tuple(mask_paths),
                dose_class="SDCT",
                tube_current_mA=spec["tube_current_mA"],
            )
        )
        log.info("phantom %s: %d nodules", subject, len(masks))
    save_manifest(DatasetManifest(records), out / "manifest.csv")
    write_json(
        out / "summary.json",
        {"n_subjects": spec["n_subjects"], "n_nodules": n_nodules, "seed": args.seed},
    )
    return 0


def _resolve(base: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else base / p


# ---------------------------------------------------------------------------
# degrade
# ---------------------------------------------------------------------------


def cmd_degrade(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    cfg = load_config(args.config)
    pre = _preprocess_config(cfg)
    dcfg = _degrade_config(cfg, args.seed)
    out = Path(args.out)
    state_path = out / "checksums.json"
    state = read_json(state_path) if state_path.exists() else {"schema_version": 1, "done": {}}
    cfg_blob = _canonical_degrade_config(dcfg)

    records = []
    processed = skipped = 0
    for rec in manifest:
        src = _resolve(base, rec.volume_path)
        content_hash = hashlib.sha256(
            src.read_bytes() + cfg_blob.encode()
        ).hexdigest()
        dst = out / "volumes" / f"{rec.subject_id}.vol"
        if state["done"].get(rec.subject_id) == content_hash and dst.exists():
            skipped += 1
            log.info("degrade %s: up to date, skipping", rec.subject_id)
        else:
            volume = load_volume(src)
            volume = preprocess_volume(volume, pre, normalize=False)
            degraded = deg.degrade_volume(
                volume, dcfg, subject_id=rec.subject_id, workers=args.workers
            )
            save_volume(degraded, dst)
            state["done"][rec.subject_id] = content_hash
            processed += 1
            log.info("degrade %s: done", rec.subject_id)
        mask_paths = []
        for mp in rec.mask_paths:
            mask = load_mask(_resolve(base, mp))
            dst_mask = out / "masks" / Path(mp).name
            save_mask(mask, dst_mask)
            mask_paths.append(str(dst_mask.relative_to(out)))
        records.append(
            ManifestRecord(
                subject_id=rec.subject_id,
                volume_path=str(dst.relative_to(out)),
                mask_paths=tuple(mask_paths),
                dose_class="LDCT",
                tube_current_mA=40.0,
            )
        )
    save_manifest(DatasetManifest(records), out / "manifest.csv")
    write_json(state_path, {"done": dict(sorted(state["done"].items()))})
    write_json(
        out / "summary.json",
        {
            "method": dcfg.method,
            "n_subjects": len(records),
            "processed": processed,
            "skipped": skipped,
            "seed": args.seed,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _normalized_patches(manifest_path: Path, pre: PreprocessConfig, size: int) -> PatchSet:
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    patches = []
    sources = []
    for rec in manifest:
        v = load_volume(_resolve(base, rec.volume_path))
        if v.unit is IntensityUnit.HU:
            v = normalize_unit(clip_window(v, pre.window_lo, pre.window_hi), pre)
        ps = center_crop_patches(v, size=size, subject_id=rec.subject_id)
        patches.append(ps.patches)
        sources.extend(ps.sources)
    return PatchSet(np.concatenate(patches, axis=0), sources)


def cmd_metrics(args) -> int:
    cfg = load_config(args.config)
    sec = cfg.get("metrics", {})
    size = int(sec.get("patch_size", 128))
    pre = _preprocess_config(cfg)
    real_path = Path(args.real)
    gen_path = Path(args.generated)
    real_manifest = load_manifest(real_path)
    gen_manifest = load_manifest(gen_path)
    real_by_id = {r.subject_id: r for r in real_manifest}
    pair_mae = []
    pair_ssim = []
    pair_msssim = []
    for rec in gen_manifest:
        if rec.subject_id not in real_by_id:
            raise DataError(f"no real counterpart for subject {rec.subject_id}")
        gv = load_volume(_resolve(gen_path.parent, rec.volume_path))
        rv = load_volume(_resolve(real_path.parent, real_by_id[rec.subject_id].volume_path))
        if gv.values.shape != rv.values.shape:
            raise DataError(f"subject {rec.subject_id}: paired volume shapes differ")
        for v in (gv, rv):
            if v.unit is not IntensityUnit.HU:
                raise DataError("paired metrics expect HU volumes")
        gn = normalize_unit(clip_window(gv, pre.window_lo, pre.window_hi), pre)
        rn = normalize_unit(clip_window(rv, pre.window_lo, pre.window_hi), pre)
        for z in range(gn.values.shape[0]):
            pair_mae.append(mae(gn.values[z], rn.values[z]))
            pair_ssim.append(ssim(gn.values[z], rn.values[z]))
            pair_msssim.append(ms_ssim(gn.values[z], rn.values[z], scales=int(sec.get("ms_ssim_scales", 5))))

    real_patches = _normalized_patches(real_path, pre, size)
    gen_patches = _normalized_patches(gen_path, pre, size)
    embedder = EmbedderSpec()
    e_real = embed_patches(real_patches, embedder)
    e_gen = embed_patches(gen_patches, embedder)
    fid_value = fid(gaussian_stats(e_real), gaussian_stats(e_gen))
    kid_mean, kid_std = kid(
        e_real,
        e_gen,
        subset_size=int(sec.get("kid_subset_size", 100)),
        n_subsets=int(sec.get("kid_subsets", 10)),
        rng=derive_rng(args.seed, "kid"),
    )
    write_json(
        Path(args.out) / "metrics.json",
        {
            "mae": float(np.mean(pair_mae)),
            "ssim": float(np.mean(pair_ssim)),
            "ms_ssim": float(np.mean(pair_msssim)),
            "fid": fid_value,
            "kid_mean": kid_mean,
            "kid_std": kid_std,
            "n_patches": len(gen_patches),
            "embedder_id": embedder.embedder_id,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# radiomics
# ---------------------------------------------------------------------------


def _extraction_config(cfg: dict) -> ExtractionConfig:
    sec = cfg.get("radiomics", {})
    return ExtractionConfig(
        bins=int(sec.get("bins", 32)),
        target_spacing=tuple(sec.get("target_spacing", (1.0, 1.0, 1.0))),
        wavelet=bool(sec.get("wavelet", True)),
        patch_margin=int(sec.get("patch_margin", 2)),
    )


def _extract_one(volume: CtVolume, mask: NoduleMask, subject: str, variant: str,
                 ecfg: ExtractionConfig, seed: int):
    if variant == ORIGINAL_VARIANT:
        use_mask = mask
    else:
        perturbed = perturb_roi(
            mask.array,
            PerturbationSpec(
                mode=variant,
                seed=derive_seed(seed, "perturb", subject, mask.nodule_id, variant),
            ),
        )
        use_mask = NoduleMask(
            CtVolume(
                perturbed.astype(np.int16),
                spacing=mask.volume.spacing,
                origin=mask.volume.origin,
                unit=IntensityUnit.RAW,
            ),
            nodule_id=mask.nodule_id,
            malignancy_score=mask.malignancy_score,
        )
    feats = extract_all(volume, use_mask, ecfg)
    label = 1 if mask.label.value == "Malignant" else 0
    return (subject, mask.nodule_id, variant, label, list(feats.values()))


def cmd_radiomics(args) -> int:
    cfg = load_config(args.config)
    ecfg = _extraction_config(cfg)
    variants = [ORIGINAL_VARIANT]
    if args.perturbations:
        variants += list(PERTURBATION_VARIANTS)
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent

    tasks = []
    for rec in manifest:
        volume = load_volume(_resolve(base, rec.volume_path))
        for mp in rec.mask_paths:
            mask = load_mask(_resolve(base, mp))
            for variant in variants:
                tasks.append((volume, mask, rec.subject_id, variant))

    def run(task):
        volume, mask, subject, variant = task
        return _extract_one(volume, mask, subject, variant, ecfg, args.seed)

    if args.workers <= 1:
        rows = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run, tasks))

    names = feature_schema(ecfg)
    fm = FeatureMatrix(
        np.asarray([r[4] for r in rows]),
        names,
        np.asarray([r[3] for r in rows]),
        [r[0] for r in rows],
        [r[1] for r in rows],
        [r[2] for r in rows],
    )
    out = Path(args.out)
    save_features(fm, out / "features.csv")
    write_json(
        out / "schema.json",
        {
            "features": names,
            "bins": ecfg.bins,
            "target_spacing": list(ecfg.target_spacing),
            "wavelet": ecfg.wavelet,
            "schema_hash": schema_hash(ecfg),
            "n_rows": fm.n_samples,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# train / evaluate / compare
# ---------------------------------------------------------------------------


def _training_config(cfg: dict, seed: int) -> TrainingConfig:
    sec = cfg.get("ml", {})
    kwargs = {}
    for key in ("selectors", "classifiers", "k_grid"):
        if key in sec:
            kwargs[key] = tuple(sec[key])
    for key in ("icc_threshold", "p_threshold", "rho_threshold", "target_per_class"):
        if key in sec:
            kwargs[key] = sec[key]
    if "hyperparams" in sec:
        kwargs["hyperparams"] = sec["hyperparams"]
    return TrainingConfig(seed=seed, **kwargs)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    tcfg = _training_config(cfg, args.seed)
    fm = load_features(args.features)
    val = load_features(args.val_features)
    original = fm.only_variant(ORIGINAL_VARIANT)
    perturbed = [fm.only_variant(v) for v in PERTURBATION_VARIANTS]
    model, report = run_training(original, perturbed, val, tcfg)
    out = Path(args.out)
    save_model(model, out / "model.json")
    write_json(out / "selection_report.json", report.to_dict())
    chosen = report.chosen
    log.info("selected %s + %s (k=%s), threshold %.4f",
             chosen[0], chosen[1], chosen[2], model.threshold)
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    sec = cfg.get("stats", {})
    model = load_model(args.model)
    fm = load_features(args.features).only_variant(ORIGINAL_VARIANT)
    scores = model.decision_scores(fm)
    results = bootstrap_metrics(
        scores,
        fm.labels,
        model.threshold,
        n=int(sec.get("n_bootstrap", 1000)),
        seed=args.seed,
        resample_fraction=float(sec.get("resample_fraction", 1.0)),
    )
    write_json(
        Path(args.out) / "evaluation.json",
        {
            "threshold": model.threshold,
            "n_test": fm.n_samples,
            "metrics": {m: results[m].to_dict() for m in METRIC_NAMES},
        },
    )
    return 0


def _bootstrap_from_dict(d: dict) -> BootstrapResult:
    return BootstrapResult(
        metric=d["metric"],
        point_estimate=d["point_estimate"],
        values=np.asarray(d["values"], dtype=np.float64),
        resample_seed=int(d["resample_seed"]),
    )


def cmd_compare(args) -> int:
    if len(args.inputs) < 2:
        raise ConfigError("compare needs at least two evaluation files")
    labels = args.labels or [f"method{i + 1}" for i in range(len(args.inputs))]
    if len(labels) != len(args.inputs):
        raise ConfigError("--labels count must match inputs")
    method_results = {}
    for name, path in zip(labels, args.inputs):
        payload = read_json(path)
        method_results[name] = {
            m: _bootstrap_from_dict(payload["metrics"][m]) for m in METRIC_NAMES
        }
    comparison = compare_methods(method_results)
    out = Path(args.out)
    summary = {
        name: {
            m: {
                "mean": res[m].mean,
                "ci_lo": res[m].ci[0],
                "ci_hi": res[m].ci[1],
            }
            for m in METRIC_NAMES
        }
        for name, res in method_results.items()
    }
    write_json(out / "comparison.json", {"methods": summary, **comparison.to_dict()})
    for m in METRIC_NAMES:
        rows = []
        n_iter = method_results[labels[0]][m].n_iterations
        for i in range(n_iter):
            rows.append([i] + [float(method_results[name][m].values[i]) for name in labels])
        write_series_csv(out / f"violin_{m}.csv", ["iteration"] + labels, rows)
        violin_svg(
            out / f"violin_{m}.svg",
            {name: method_results[name][m].values for name in labels},
            title=m,
        )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosekit",
        description="Low-dose CT degradation and nodule classification toolkit",
    )
    parser.add_argument("--config", default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="worker pool size")
    parser.add_argument("--log", default="warning", help="log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic phantom dataset")
    p.add_argument("--spec", required=True, help="dataset spec JSON")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("degrade", help="degrade a dataset to simulated low dose")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("metrics", help="image-quality and distribution metrics")
    p.add_argument("--real", required=True, help="reference manifest")
    p.add_argument("--generated", required=True, help="generated manifest")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("radiomics", help="extract radiomic features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--perturbations", action="store_true",
                   help="also extract dilate/erode/contour-noise variants")
    p.set_defaults(func=cmd_radiomics)

    p = sub.add_parser("train", help="feature selection + classifier grid")
    p.add_argument("--features", required=True, help="training features CSV")
    p.add_argument("--val-features", required=True, help="validation features CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="bootstrap evaluation of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="test features CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="statistical comparison of evaluations")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--labels", nargs="+", default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log.upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DosekitError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
