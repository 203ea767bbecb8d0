"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 bad configuration or
validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import extrinsic, massflux, slicing
from .errors import NumericalError, PolymassError, UnknownIdError, ValidationError
from .massflux import Sphere
from .polytope import DEFAULT_GEOMETRIES, polyhedron_from_id
from .tensorfield import DEFAULT_FIELDS, MetricCatalogEntry, field_from_id, with_corrupted_derivative

EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


@dataclass
class RunConfig:
    field: Optional[str] = None
    geometry: Optional[str] = None
    scales: list = dataclasses.field(default_factory=list)
    quad_level: int = massflux.DEFAULT_LEVEL
    c: float = massflux.DEFAULT_ANGLE_CONSTANT
    format: str = "csv"
    out: Optional[str] = None
    seed: Optional[int] = None
    threads: int = 1

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown configuration key(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.quad_level < 0:
            raise ValidationError(f"--quad-level must be >= 0, got {self.quad_level}")
        if not 0 < self.c <= 1:
            raise ValidationError(f"--c must lie in (0, 1], got {self.c}")
        if self.format not in ("csv", "json"):
            raise ValidationError(f"--format must be csv or json, got {self.format!r}")
        if self.threads < 1:
            raise ValidationError(f"--threads must be >= 1, got {self.threads}")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValidationError("--scales must be strictly increasing")
        if any(s <= 0 for s in self.scales):
            raise ValidationError("--scales must be positive")


# --------------------------------------------------------------------------
# output


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v + 0.0, ".17g")  # folds -0.0 into 0
    return str(v)


def _json_cell(v):
    if isinstance(v, float):
        return v + 0.0 if math.isfinite(v) else None
    return v


def render(rows: Sequence[dict], fmt: str) -> str:
    if fmt == "json":
        clean = [{k: _json_cell(v) for k, v in r.items()} for r in rows]
        return json.dumps({"rows": clean}, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        columns = list(rows[0].keys())
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(rows: Sequence[dict], cfg: RunConfig) -> None:
    text = render(rows, cfg.format)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# geometry ids


def surface_from_id(ident: str):
    parts = ident.split(":")
    if parts[0] == "sphere":
        if len(parts) != 3:
            raise UnknownIdError(f"malformed sphere id {ident!r}; expected sphere:n:radius")
        try:
            n, r = int(parts[1]), float(parts[2])
        except ValueError:
            raise UnknownIdError(f"malformed sphere id {ident!r}") from None
        if r <= 0:
            raise ValidationError(f"sphere radius must be positive in {ident!r}")
        return Sphere(n, r)
    return polyhedron_from_id(ident)


def _require(value, flag: str):
    if value is None:
        raise ValidationError(f"{flag} is required")
    return value


# --------------------------------------------------------------------------
# subcommands


def cmd_catalog(cfg: RunConfig, args) -> int:
    rows = []
    for fid in DEFAULT_FIELDS:
        entry = MetricCatalogEntry.parse(fid)
        rows.append(
            {
                "kind": "field",
                "id": fid,
                "dim": entry.dim,
                "analytic_mass": entry.analytic_mass,
                "detail": entry.name,
            }
        )
    for gid in DEFAULT_GEOMETRIES:
        P = polyhedron_from_id(gid)
        rows.append(
            {
                "kind": "geometry",
                "id": gid,
                "dim": P.dim,
                "analytic_mass": None,
                "detail": f"{len(P.faces)} faces, {len(P.edges)} edges, r_P={P.inner_radius:.6g}",
            }
        )
    emit(rows, cfg)
    return EXIT_OK


def cmd_mass(cfg: RunConfig, args) -> int:
    fld = field_from_id(_require(cfg.field, "--field"))
    surface = surface_from_id(_require(cfg.geometry, "--geometry"))
    method = args.method
    if isinstance(surface, Sphere):
        if method in ("polyhedral", "flux_polyhedron"):
            raise ValidationError(f"method {method} needs a polyhedron, got {surface.label}")
        methods = ["flux_sphere"]
    elif method == "all":
        methods = ["flux_polyhedron", "polyhedral"]
    elif method in ("flux", "flux_polyhedron"):
        methods = ["flux_polyhedron"]
    elif method == "flux_sphere":
        raise ValidationError("method flux_sphere needs a sphere:n:radius geometry")
    else:
        methods = [method]
    rows = []
    for m in methods:
        if m == "polyhedral":
            rep = massflux.polyhedral_mass(fld, surface, cfg.quad_level, cfg.c, cfg.threads)
        else:
            rep = massflux.adm_flux_mass(fld, surface, cfg.quad_level, cfg.threads)
        rows.append(rep.row())
    emit(rows, cfg)
    return EXIT_OK


def cmd_converge(cfg: RunConfig, args) -> int:
    fld = field_from_id(_require(cfg.field, "--field"))
    base = polyhedron_from_id(_require(cfg.geometry, "--geometry"))
    scales = cfg.scales or [25.0, 50.0, 100.0, 200.0]
    methods = ["flux_polyhedron", "polyhedral"] if args.method == "all" else [args.method]
    # scales multiply the base geometry: cube:3:1 with scale 25 is cube:3:25
    table = massflux.convergence_study(fld, base, scales, cfg.quad_level, cfg.c, methods, cfg.threads)
    rows = []
    for m in methods:
        for rep in table.reports[m]:
            row = rep.row()
            row["fitted_order"] = table.fitted_order[m]
            row["extrapolated"] = table.limit[m]
            rows.append(row)
    emit(rows, cfg)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    ids = [cfg.field] if cfg.field else list(DEFAULT_FIELDS)
    rows, failed = [], []
    for fid in ids:
        fld = field_from_id(fid)
        if args.inject_fault:
            fld = with_corrupted_derivative(fld)
        for rep in extrinsic.verify_field(fld, args.radii):
            status = "pass" if rep.passed else "fail"
            if not rep.passed:
                failed.append(f"{fid}/{rep.name}")
            rows.append(
                {
                    "field": fid,
                    "test": rep.name,
                    "radii": " ".join(format(r, "g") for r in rep.radii),
                    "fitted_order": rep.fitted_order,
                    "predicted_order": rep.predicted_order,
                    "residual": rep.residuals[-1],
                    "status": status if not rep.exact else "pass (exact zero)",
                }
            )
    emit(rows, cfg)
    if failed:
        print("verification failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_slice(cfg: RunConfig, args) -> int:
    fld = field_from_id(_require(cfg.field, "--field"))
    L = args.L
    if L is None or L <= 0:
        raise ValidationError("--L must be a positive number")
    n = fld.dim
    if args.axis == "all":
        axes = list(range(1, n + 1))
    else:
        try:
            axes = [int(args.axis)]
        except ValueError:
            raise ValidationError(f"--axis must be an integer or 'all', got {args.axis!r}") from None
        if not 1 <= axes[0] <= n:
            raise ValidationError(f"--axis must lie in 1..{n}")
    if args.integrate:
        total = slicing.slice_mass_integral(fld, L, cfg.quad_level, args.t_nodes)
        flux = massflux.adm_flux_mass(fld, polyhedron_from_id(f"cube:{n}:{L!r}"), cfg.quad_level)
        rows = [
            {
                "field": cfg.field,
                "L": float(L),
                "t_nodes": args.t_nodes,
                "slice_mass": total,
                "flux_mass": flux.mass_estimate,
                "difference": total - flux.mass_estimate,
            }
        ]
    else:
        rows = [q.row() for q in slicing.slice_profile(fld, L, axes, cfg.quad_level, args.t_nodes)]
    emit(rows, cfg)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quad-level", type=int, default=None, help="quadrature refinement level")
    common.add_argument("--c", type=float, default=None, help="angle constant for |sin alpha_bar| >= c")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=None, help="echoed into the run configuration")
    common.add_argument("--config", default=None, help="JSON file with run configuration keys")

    parser = argparse.ArgumentParser(prog="polymass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", parents=[common], help="list catalog fields and geometries")

    p = sub.add_parser("mass", parents=[common], help="flux and polyhedral mass on one surface")
    p.add_argument("--field")
    p.add_argument("--geometry")
    p.add_argument(
        "--method",
        default="all",
        choices=("all", "polyhedral", "flux", "flux_polyhedron", "flux_sphere"),
    )

    p = sub.add_parser("converge", parents=[common], help="mass estimates over a scale ladder")
    p.add_argument("--field")
    p.add_argument("--geometry")
    p.add_argument("--scales", type=_float_list, default=None)
    p.add_argument("--method", default="all", choices=("all", "polyhedral", "flux_polyhedron"))

    p = sub.add_parser("verify", parents=[common], help="expansion residual orders")
    p.add_argument("--field")
    p.add_argument("--radii", type=_float_list, default=list(extrinsic.DEFAULT_LADDER))
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("slice", parents=[common], help="slice profiles and slice-integrated mass")
    p.add_argument("--field")
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--axis", default="all")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--profile", action="store_true", default=True)
    mode.add_argument("--integrate", action="store_true")
    p.add_argument("--t-nodes", type=int, default=slicing.DEFAULT_T_NODES)
    return parser


def config_from_args(args) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        data.update(loaded)
        # validate keys before merging flags
        RunConfig.from_mapping(dict(loaded))
    flags = {
        "field": getattr(args, "field", None),
        "geometry": getattr(args, "geometry", None),
        "scales": getattr(args, "scales", None),
        "quad_level": args.quad_level,
        "c": args.c,
        "format": args.format,
        "out": args.out,
        "seed": args.seed,
        "threads": args.threads,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig.from_mapping(data)


COMMANDS = {
    "catalog": cmd_catalog,
    "mass": cmd_mass,
    "converge": cmd_converge,
    "verify": cmd_verify,
    "slice": cmd_slice,
}


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        cfg = config_from_args(args)
        if getattr(args, "t_nodes", 1) < 1:
            raise ValidationError("--t-nodes must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PolymassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
