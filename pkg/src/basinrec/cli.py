"""Command-line pipeline: gen-data, train, reconstruct, entropy, sweep.

Every subcommand echoes its resolved configuration next to its outputs and
is byte-identical across reruns (and worker counts) at fixed seeds.
Exit codes: 0 success, 1 runtime or numeric failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .dynsys import (BISTABLE_R_MAX, BISTABLE_R_MIN, IntegratorConfig, LorenzParams,
                     StepSizeUnderflow)
from .labeling import SamplingDomain, generate_dataset, load_dataset, save_dataset, train_test_split
from .mlp import (NetworkArch, TrainConfig, TrainingDivergence, load_model, save_model,
                  train)
from .entropy import EntropyConfig, basin_entropy, save_entropy
from .boundary import (GridSpec2D, SphereSpec, evaluate_slice, evaluate_sphere,
                       extract_boundary, grid_accuracy, ground_truth_slice,
                       midway_center, save_boundary, save_slice, save_sphere)
from .analysis import (DEFAULT_SWEEP_R, SweepConfig, default_exp_init, derive_seeds,
                       fit_exponential, fit_linear, save_fit, save_sweep, sweep,
                       two_region_fits)
from .fileio import read_json, sidecar_path, write_json


class UsageError(Exception):
    """Configuration or input problems; mapped to exit code 2."""


def _bistable_params(r: float, sigma: float, beta: float) -> LorenzParams:
    if not BISTABLE_R_MIN < r < BISTABLE_R_MAX:
        raise UsageError(f"r = {r} outside the bistable range "
                         f"({BISTABLE_R_MIN} < r < {BISTABLE_R_MAX})")
    return LorenzParams(r=r, sigma=sigma, beta=beta)


def _check_out(path: str) -> Path:
    out = Path(path)
    if not out.parent.exists():
        raise UsageError(f"output directory does not exist: {out.parent}")
    return out


def _parse_arch(text: str, input_scale: float) -> NetworkArch:
    try:
        sizes = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse --arch {text!r}; expected e.g. 3,64,64,32,1")
    try:
        return NetworkArch(sizes, input_scale=input_scale)
    except ValueError as exc:
        raise UsageError(str(exc))


def _config_section(cfg: dict, name: str, cls, **overrides):
    section = dict(cfg.get(name, {}))
    section.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad {name} config: {exc}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        cfg = read_json(p)
    except ValueError as exc:
        raise UsageError(f"cannot parse config {p}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError(f"config root must be a JSON object: {p}")
    return cfg


def _domain_from(cfg: dict, bound: float | None) -> SamplingDomain:
    section = cfg.get("domain", {})
    if bound is not None:
        return SamplingDomain((-bound,) * 3, (bound,) * 3)
    if section:
        try:
            return SamplingDomain(tuple(section["lower"]), tuple(section["upper"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad domain config: {exc}")
    return SamplingDomain()


def _echo_config(out: Path, subcommand: str, resolved: dict) -> None:
    # worker count deliberately excluded: results are worker-independent
    write_json(sidecar_path(out, "config"),
               {"subcommand": subcommand, "version": __version__, **resolved})


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    params = _bistable_params(args.r, args.sigma, args.beta)
    integ = _config_section(cfg, "integrator", IntegratorConfig)
    domain = _domain_from(cfg, args.domain_halfwidth)
    out = _check_out(args.out)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    result = generate_dataset(params, args.n, domain, integ, args.seed,
                              workers=args.workers)
    save_dataset(result, out, params, domain, integ, args.seed)
    _echo_config(out, "gen-data", {
        "params": asdict(params), "n": args.n, "seed": args.seed,
        "domain": {"lower": list(domain.lower), "upper": list(domain.upper)},
        "integrator": asdict(integ),
    })
    print(f"wrote {len(result.data)} samples to {out} "
          f"(undecided_fraction={result.undecided_fraction}, "
          f"failed={result.n_failed})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    data_path = Path(args.data)
    if not data_path.exists():
        raise UsageError(f"dataset not found: {data_path}")
    data = load_dataset(data_path)
    if not 0.0 < args.test_frac < 1.0:
        raise UsageError("--test-frac must lie strictly between 0 and 1")
    if int(len(data) * args.test_frac) < 1:
        raise UsageError(f"--test-frac {args.test_frac} yields an empty test set "
                         f"for {len(data)} samples")
    out = _check_out(args.out_model)
    seeds = derive_seeds(args.seed)
    arch = _parse_arch(args.arch, args.input_scale)
    train_cfg = _config_section(cfg, "train", TrainConfig,
                                seed=seeds.train,
                                epochs=args.epochs,
                                batch_size=args.batch_size,
                                learning_rate=args.learning_rate,
                                optimizer=args.optimizer)
    tr, te = train_test_split(data, 1.0 - args.test_frac, seeds.split)
    params_net, report = train(tr, te, arch, train_cfg)
    save_model(params_net, out, train_cfg,
               extra_provenance={"dataset": str(data_path), "master_seed": args.seed,
                                 "test_fraction": args.test_frac})
    write_json(sidecar_path(out, "report"), {
        "final_train_accuracy": report.final_train_accuracy,
        "final_test_accuracy": report.final_test_accuracy,
        "loss_history": report.loss_history,
    })
    _echo_config(out, "train", {
        "data": str(data_path), "test_frac": args.test_frac, "seed": args.seed,
        "arch": asdict(arch), "train": asdict(train_cfg),
    })
    print(f"train_accuracy={report.final_train_accuracy} "
          f"test_accuracy={report.final_test_accuracy}")
    print(f"loss first={report.loss_history[0]} last={report.loss_history[-1]} "
          f"epochs={len(report.loss_history)}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    model_path = Path(args.model)
    if not model_path.exists():
        raise UsageError(f"model not found: {model_path}")
    try:
        net = load_model(model_path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot load model: {exc}")
    out = _check_out(args.out)
    integ = _config_section(cfg, "integrator", IntegratorConfig)
    provenance = {"model": str(model_path)}

    if args.mode == "slice":
        spec = GridSpec2D(args.plane_z, tuple(args.x_range), tuple(args.y_range),
                          args.nx, args.ny)
        field = evaluate_slice(net, spec)
        truth = None
        if args.truth:
            params = _bistable_params(args.r, args.sigma, args.beta)
            truth = ground_truth_slice(params, spec, integ, workers=args.workers)
            acc = grid_accuracy(field, truth)
            print(f"grid_accuracy={acc} "
                  f"(decided {int((truth >= 0).sum())}/{len(truth)})")
        save_slice(field, out, spec, truth, provenance)
        _echo_config(out, "reconstruct", {
            "mode": "slice", "model": str(model_path), "truth": bool(args.truth),
            "spec": {"plane_z": spec.plane_z, "x_range": list(spec.x_range),
                     "y_range": list(spec.y_range), "nx": spec.nx, "ny": spec.ny},
        })
        print(f"wrote {len(field.points)} lattice points to {out}")
    elif args.mode == "sphere":
        if args.center is not None:
            center = tuple(args.center)
        else:
            params = _bistable_params(args.r, args.sigma, args.beta)
            center = midway_center(params)
        spec = SphereSpec(center, args.radius, args.n_theta, args.n_phi)
        field = evaluate_sphere(net, spec)
        save_sphere(field, out, spec, provenance)
        _echo_config(out, "reconstruct", {
            "mode": "sphere", "model": str(model_path),
            "spec": {"center": list(center), "radius": spec.radius,
                     "n_theta": spec.n_theta, "n_phi": spec.n_phi},
        })
        print(f"wrote {len(field.points)} sphere points to {out}")
    else:  # volume
        domain = _domain_from(cfg, args.domain_halfwidth)
        band = tuple(args.band)
        if not band[0] < 0.5 < band[1]:
            raise UsageError(f"--band must straddle 0.5, got {band}")
        pts, probs = extract_boundary(net, domain, args.resolution, band)
        save_boundary(pts, probs, out, domain, args.resolution, band, provenance)
        _echo_config(out, "reconstruct", {
            "mode": "volume", "model": str(model_path),
            "volume": {"lower": list(domain.lower), "upper": list(domain.upper)},
            "resolution": args.resolution, "band": list(band),
        })
        print(f"extracted {len(pts)} boundary points to {out}")
    return 0


def cmd_entropy(args) -> int:
    cfg = _load_config(args.config)
    params = _bistable_params(args.r, args.sigma, args.beta)
    integ = _config_section(cfg, "integrator", IntegratorConfig)
    domain = _domain_from(cfg, args.domain_halfwidth)
    out = _check_out(args.out)
    try:
        ent_cfg = EntropyConfig(n_boxes=args.n_boxes, trajs_per_box=args.trajs_per_box,
                                box_side=args.box_side, domain=domain,
                                log_base=args.log_base, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    result = basin_entropy(params, ent_cfg, integ, workers=args.workers)
    save_entropy(result, out, params, ent_cfg, integ)
    _echo_config(out, "entropy", {
        "params": asdict(params),
        "entropy": {"n_boxes": ent_cfg.n_boxes, "trajs_per_box": ent_cfg.trajs_per_box,
                    "box_side": ent_cfg.box_side, "log_base": ent_cfg.log_base,
                    "seed": ent_cfg.seed,
                    "domain": {"lower": list(domain.lower), "upper": list(domain.upper)}},
        "integrator": asdict(integ),
    })
    print(f"basin_entropy={result.value} (unusable_boxes={result.n_unusable})")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        r_values = sorted(float(v) for v in args.r_list.split(","))
    except ValueError:
        raise UsageError(f"cannot parse --r-list {args.r_list!r}")
    for r in r_values:
        _bistable_params(r, args.sigma, args.beta)

    domain = _domain_from(cfg, args.domain_halfwidth)
    sweep_cfg = SweepConfig(
        n_samples=args.n_samples,
        train_fraction=1.0 - args.test_frac,
        sigma=args.sigma,
        beta=args.beta,
        domain=domain,
        integrator=_config_section(cfg, "integrator", IntegratorConfig),
        arch=_parse_arch(args.arch, args.input_scale),
        train_cfg=_config_section(cfg, "train", TrainConfig,
                                  epochs=args.epochs, batch_size=args.batch_size,
                                  learning_rate=args.learning_rate),
        entropy_cfg=_config_section(cfg, "entropy", EntropyConfig,
                                    n_boxes=args.n_boxes,
                                    trajs_per_box=args.trajs_per_box,
                                    box_side=args.box_side,
                                    domain=domain),
    )
    rows = sweep(r_values, sweep_cfg, args.seed, workers=args.workers)
    save_sweep(rows, out_dir / "sweep.csv")
    _echo_config(out_dir / "sweep.csv", "sweep", {
        "r_values": r_values, "seed": args.seed, "n_samples": args.n_samples,
        "test_frac": args.test_frac, "arch": asdict(sweep_cfg.arch),
        "train": asdict(sweep_cfg.train_cfg),
        "entropy": {**{k: v for k, v in asdict(sweep_cfg.entropy_cfg).items()
                       if k != "domain"},
                    "domain": {"lower": list(domain.lower), "upper": list(domain.upper)}},
        "integrator": asdict(sweep_cfg.integrator),
    })
    for row in rows:
        mark = " FAILED" if row.failed else ""
        print(f"r={row.r} accuracy={row.accuracy} basin_entropy={row.basin_entropy}"
              f"{mark}")

    usable = [row for row in rows if not row.failed]
    if len(usable) < 4:
        print(f"fits skipped: need >= 4 successful rows, have {len(usable)}")
        return 0
    rs = [row.r for row in usable]
    accs = [row.accuracy for row in usable]
    sbs = [row.basin_entropy for row in usable]
    fit_acc = fit_exponential(rs, accs, default_exp_init(rs, accs))
    save_fit(fit_acc, out_dir / "fit_accuracy_vs_r.json", "accuracy ~ exp(r)")
    fit_sb = fit_exponential(rs, sbs, default_exp_init(rs, sbs))
    save_fit(fit_sb, out_dir / "fit_entropy_vs_r.json", "basin_entropy ~ exp(r)")
    fit_lin = fit_linear(sbs, accs)
    save_fit(fit_lin, out_dir / "fit_accuracy_vs_entropy.json",
             "accuracy ~ basin_entropy")
    print(f"linear fit accuracy~entropy: slope={fit_lin.params['slope']} "
          f"p={fit_lin.p_values['slope']}")
    try:
        fit_low, fit_high = two_region_fits(rows)
    except ValueError as exc:
        print(f"two-region fits skipped: {exc}")
    else:
        save_fit(fit_low, out_dir / "fit_two_region_low.json",
                 "accuracy ~ basin_entropy, r <= 13.5")
        save_fit(fit_high, out_dir / "fit_two_region_high.json",
                 "accuracy ~ basin_entropy, r >= 14")
        print(f"two-region slopes: low={fit_low.params['slope']} "
              f"high={fit_high.params['slope']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basinrec",
        description="Reconstruct Lorenz basins of attraction with a trained classifier.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--config", default=None, help="JSON config with section defaults")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
        p.add_argument("--sigma", type=float, default=10.0)
        p.add_argument("--beta", type=float, default=8.0 / 3.0)
        p.add_argument("--domain-halfwidth", type=float, default=None,
                       help="use the cube (-w, w)^3 as sampling domain")

    p = sub.add_parser("gen-data", help="generate a labeled dataset CSV")
    common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the classifier on a dataset CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--arch", default="3,64,64,32,1")
    p.add_argument("--input-scale", type=float, default=50.0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--out-model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="evaluate a trained model on a grid")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=("slice", "sphere", "volume"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--r", type=float, default=12.0,
                   help="needed for --truth and the default sphere center")
    p.add_argument("--truth", action="store_true",
                   help="slice mode: also integrate ground truth and print accuracy")
    p.add_argument("--plane-z", type=float, default=5.0)
    p.add_argument("--x-range", type=float, nargs=2, default=(-20.0, 20.0))
    p.add_argument("--y-range", type=float, nargs=2, default=(-20.0, 20.0))
    p.add_argument("--nx", type=int, default=100)
    p.add_argument("--ny", type=int, default=100)
    p.add_argument("--radius", type=float, default=30.0)
    p.add_argument("--center", type=float, nargs=3, default=None)
    p.add_argument("--n-theta", type=int, default=200)
    p.add_argument("--n-phi", type=int, default=400)
    p.add_argument("--resolution", type=int, default=60)
    p.add_argument("--band", type=float, nargs=2, default=(0.4, 0.6))
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("entropy", help="compute the basin entropy at one r")
    common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--n-boxes", type=int, default=25)
    p.add_argument("--trajs-per-box", type=int, default=25)
    p.add_argument("--box-side", type=float, default=4.0)
    p.add_argument("--log-base", choices=("natural", "2"), default="natural")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sweep", help="accuracy and entropy across r, with fits")
    common(p)
    p.add_argument("--r-list", default=",".join(str(r) for r in DEFAULT_SWEEP_R))
    p.add_argument("--n-samples", type=int, default=20000)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--arch", default="3,64,64,32,1")
    p.add_argument("--input-scale", type=float, default=50.0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--n-boxes", type=int, default=None)
    p.add_argument("--trajs-per-box", type=int, default=None)
    p.add_argument("--box-side", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StepSizeUnderflow, TrainingDivergence, ArithmeticError, OSError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
