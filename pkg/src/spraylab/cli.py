"""Batch command-line front end.

    spraylab verify-spray --config cfg.json [--seed N] [--out report.json]
    spraylab degree       --config cfg.json [--seed N] [--out report.json]
    spraylab make-ak      --config cfg.json [--seed N] [--out report.json]
    spraylab approximate  --config cfg.json [--seed N] [--out report.json]

Exit codes: 0 pass, 1 verification or pipeline failure, 2 usage error.
Reports are canonical JSON (sorted keys, shortest round-trip floats) and are
byte-identical across reruns with the same seed.  SPRAYLAB_THREADS caps
worker parallelism; execution is sequential, so any cap >= 1 is honored.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .approx import DegreeExhaustedError, HomotopyTooWildError
from .approx import approximate as run_pipeline
from .degree import (
    DegeneracyError,
    DegreeOptions,
    InconsistencyError,
    a_k,
    antipodal_map,
    fermat_power_self_map,
    identity_map,
    power_map_matrix,
    sharp_product,
    sphere_degree,
    unitary_degree,
    verify_ak_identities,
)
from .demos import DEMOS
from .geometry import VarietySpec
from .serialize import dumps_canonical, parse_variety_label, variety_from_json
from .sprays import (
    Spray,
    constant_spray,
    group_action_spray,
    iterated_spray,
    probe_injectivity_radius,
    product_submersion_spray,
    stereographic_spray,
    verify_dominating,
    verify_spray_axioms,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _threads_cap() -> int:
    raw = os.environ.get("SPRAYLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parse_variety(spec) -> VarietySpec:
    if isinstance(spec, str):
        return parse_variety_label(spec)
    if isinstance(spec, dict):
        return variety_from_json(spec)
    raise UsageError(f"cannot parse variety {spec!r}")


def build_spray(config: dict) -> Spray:
    """Construct a spray from its JSON description (CLI surface)."""
    kind = config.get("kind")
    if kind == "stereographic":
        return stereographic_spray(int(config["n"]), config.get("fiber", "frame"))
    if kind == "group":
        group = _parse_variety(config["group"])
        space_cfg = config.get("space")
        if space_cfg in (None, "default"):
            space = None
        elif space_cfg == "self":
            space = group
        else:
            space = _parse_variety(space_cfg)
        return group_action_spray(group, space, config.get("shrink_c"))
    if kind == "product":
        return product_submersion_spray(
            _parse_variety(config["x"]), build_spray(config["inner"])
        )
    if kind == "iterated":
        return iterated_spray(build_spray(config["inner"]), int(config["k"]))
    if kind == "constant":
        return constant_spray(VarietySpec.sphere(int(config.get("n", 2))))
    raise UsageError(f"unknown spray kind {kind!r}")


def _write_report(report: dict, out_path) -> None:
    text = dumps_canonical(report)
    if out_path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spraylab-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_verify_spray(config: dict, seed: int, out) -> int:
    spray = build_spray(config)
    axioms = verify_spray_axioms(
        spray,
        n_samples=int(config.get("samples", 1000)),
        seed=seed,
        tol=float(config.get("tol", 1e-10)),
        fiber_radius=float(config.get("fiber_radius", 10.0)),
    )
    dominance = verify_dominating(
        spray,
        n_samples=int(config.get("dominance_samples", min(int(config.get("samples", 1000)), 500))),
        seed=seed,
        fd_step=float(config.get("fd_step", 1e-5)),
        rank_tol=float(config.get("rank_tol", 1e-6)),
    )
    passed = axioms.passed and dominance.passed
    report = {
        "command": "verify-spray",
        "config": config,
        "seed": seed,
        "threads_cap": _threads_cap(),
        "pass": passed,
        "max_violation": axioms.max_violation,
        "per_sample": axioms.per_sample,
        "axioms": axioms,
        "dominance": dominance,
        "injectivity_radius": probe_injectivity_radius(spray, seed=seed),
        "spray": spray.descriptor(),
    }
    _write_report(report, out)
    return EXIT_OK if passed else EXIT_FAIL


def _build_matrix_map(config: dict):
    name = config.get("map")
    if name == "a_k":
        return a_k(int(config["k"]), cap=int(config.get("cap", 6)))
    if name == "power":
        return power_map_matrix(int(config["d"]))
    if name == "conj":
        return power_map_matrix(-1)
    if name == "sharp":
        return sharp_product(_build_matrix_map(config["f"]), _build_matrix_map(config["g"]))
    raise UsageError(f"unknown matrix map {name!r}")


def cmd_degree(config: dict, seed: int, out) -> int:
    name = config.get("map")
    opts = DegreeOptions(
        seed=seed,
        n_starts=config.get("n_starts"),
        max_dim=int(config.get("max_dim", 5)),
    )
    if name in ("a_k", "power", "conj", "sharp"):
        report = unitary_degree(_build_matrix_map(config), opts)
    elif name == "fermat":
        report = sphere_degree(
            fermat_power_self_map(int(config["n"]), int(config["k"])), int(config["n"]), opts
        )
    elif name == "identity":
        report = sphere_degree(identity_map, int(config["n"]), opts)
    elif name == "antipodal":
        report = sphere_degree(antipodal_map, int(config["n"]), opts)
    else:
        raise UsageError(f"unknown map {name!r}")
    _write_report(
        {
            "command": "degree",
            "config": config,
            "seed": seed,
            "threads_cap": _threads_cap(),
            "report": report,
        },
        out,
    )
    return EXIT_OK


def cmd_make_ak(config: dict, seed: int, out) -> int:
    k = int(config["k"])
    mapping = a_k(k, cap=int(config.get("cap", 6)))
    identities = verify_ak_identities(
        k, n_samples=int(config.get("samples", 1000)), seed=seed
    )
    report = {
        "command": "make-ak",
        "config": config,
        "seed": seed,
        "threads_cap": _threads_cap(),
        "map": {"name": mapping.name, "k": k, "size": mapping.p},
        "identities": identities,
        "min_abs_det_on_sphere": mapping.min_abs_det(seed=seed),
        "pass": identities.passed,
    }
    _write_report(report, out)
    return EXIT_OK if identities.passed else EXIT_FAIL


def cmd_approximate(config: dict, seed: int, out) -> int:
    name = config.get("demo")
    if name not in DEMOS:
        raise UsageError(f"unknown demo {name!r} (available: {sorted(DEMOS)})")
    demo = DEMOS[name]()
    cfg = demo.cfg
    cfg.seed = seed
    if "target_c0" in config:
        cfg.target_c0 = float(config["target_c0"])
    if "d_max" in config:
        cfg.d_max = int(config["d_max"])
    if "grid_size" in config:
        cfg.grid_size = int(config["grid_size"])
    try:
        approx = run_pipeline(demo.f_many, demo.homotopy, demo.spray, cfg)
    except (HomotopyTooWildError, DegreeExhaustedError) as exc:
        _write_report(
            {
                "command": "approximate",
                "config": config,
                "seed": seed,
                "threads_cap": _threads_cap(),
                "error": {"stage": "tracking", "message": str(exc)},
            },
            out,
        )
        return EXIT_FAIL
    report = {
        "command": "approximate",
        "config": config,
        "seed": seed,
        "threads_cap": _threads_cap(),
        "approximation": approx.to_jsonable(),
    }
    if config.get("check_degree", True):
        deg = sphere_degree(
            approx.eval_many, demo.homotopy.target.n, DegreeOptions(seed=seed)
        )
        report["degree"] = {
            "value": deg.value,
            "method": deg.method,
            "expected": demo.expected_degree,
        }
    _write_report(report, out)
    return EXIT_OK if approx.status == "ok" else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spraylab",
        description="Spray verification, degree computation, and regular approximation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify-spray", "degree", "make-ak", "approximate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="report path (default: stdout)")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0

    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"spraylab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    handlers = {
        "verify-spray": cmd_verify_spray,
        "degree": cmd_degree,
        "make-ak": cmd_make_ak,
        "approximate": cmd_approximate,
    }
    try:
        return handlers[args.command](config, seed, args.out)
    except UsageError as exc:
        print(f"spraylab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"spraylab: bad config: {exc!r}", file=sys.stderr)
        return EXIT_USAGE
    except (InconsistencyError, DegeneracyError, RuntimeError) as exc:
        print(f"spraylab: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
