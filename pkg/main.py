from __future__ import annotations

import argparse
import logging
import math
import re
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np

from scripts import utils
from scripts.core_model import Circulations, VortexConfiguration, conserved_quantities, integrate_full
from scripts.equilibria import all_equilibria, bifurcation_scan, region_grid
from scripts.errors import ConfigError, NumericalError, VortexError
from scripts.portrait import PortraitSpec, portrait_frame, portrait_summary, sample_portrait
from scripts.reduction import (
    ReducedState,
    integrate_reduced,
    pairwise_distances,
    project_to_quadric,
    reduce_configuration,
    reduced_hamiltonian,
    reduction_order,
    singularities,
)
from scripts.report_excel import equilibria_frame, generate_excel_report
from scripts.report_svg import write_portrait_svg
from scripts.tool_collapse import collapse_analysis
from scripts.zero_circulation import (
    ZeroCircReducedState,
    bracket_constant,
    h_zero,
    integrate_zero_reduced,
    zero_equilibria,
    zero_singularities,
)

logger = logging.getLogger("main")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ConfigError(message)


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def normalize_argv(argv: Sequence[str]) -> list[str]:
    """
    `--flag -1,1` → `--flag=-1,1`: argparse принимает значения вида -1,1 или -2.5:1.5:0.01
    за имена опций.
    """
    out: list[str] = []
    k = 0
    while k < len(argv):
        token = argv[k]
        if token.startswith("--") and "=" not in token and k + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[k + 1]):
            out.append(f"{token}={argv[k + 1]}")
            k += 2
            continue
        out.append(token)
        k += 1
    return out


def _emit(data: dict[str, Any] | list[Any]) -> None:
    sys.stdout.write(utils.dumps_json(data).decode() + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON-файл параметров (флаги имеют приоритет)")
    common.add_argument("--gamma", type=str, help="Циркуляции Γ₁,Γ₂,Γ₃ (допускаются дроби 1/3)")
    common.add_argument("--theta", type=str, help="Уровень Θ")
    common.add_argument("--tol", type=float, help="Допуск интегратора (по умолч. 1e-10)")
    common.add_argument("--out", type=Path, help="Каталог результатов (по умолч. output/<дата>_<хеш>)")
    common.add_argument("-v", "--verbose", action="store_true", help="Подробный журнал (DEBUG)")

    ap = _Parser(description="Фазовое пространство трёх точечных вихрей")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p1 = sub.add_parser("simulate", parents=[common], help="Полная динамика трёх вихрей -> trajectory.csv")
    p1.add_argument("--positions", type=str, required=True, help="Положения z₁,z₂,z₃, например 0,1,0.5+0.8j")
    p1.add_argument("--t-end", type=float, default=10.0, help="Конечное время (по умолч. 10)")
    p1.add_argument("--samples", type=int, default=1001, help="Число сохраняемых точек")
    p1.add_argument("--collision-floor", type=float, help="Порог сближения пары для остановки")

    p2 = sub.add_parser("reduce", parents=[common], help="Приведённое состояние (X,Y,Z;Θ) и его траектория")
    src = p2.add_mutually_exclusive_group(required=True)
    src.add_argument("--positions", type=str, help="Положения z₁,z₂,z₃")
    src.add_argument("--state", type=str, help="X,Y,Z (проецируется на квадрику уровня --theta)")
    p2.add_argument("--t-end", type=float, default=0.0, help="Если > 0, интегрировать приведённый поток")
    p2.add_argument("--samples", type=int, default=1001)

    p3 = sub.add_parser("equilibria", parents=[common], help="Относительные равновесия и их устойчивость")
    p3.add_argument("--format", choices=["json", "csv"], default="json")

    p4 = sub.add_parser("scan", parents=[common], help="Бифуркационный скан или сетка областей")
    p4.add_argument("--axis", choices=["symmetric", "trilinear"], default="symmetric")
    p4.add_argument("--range", type=str, default="-2.5:0.99:0.01", help="Диапазон Γ₃ вида a:b:шаг")
    p4.add_argument("--step", type=float, default=0.05, help="Шаг сетки (trilinear)")
    p4.add_argument("--extent", type=float, default=2.0, help="Полуразмер сетки (trilinear)")
    p4.add_argument("--workers", type=int, default=4)

    p5 = sub.add_parser("portrait", parents=[common], help="Фазовый портрет -> CSV/JSON/SVG")
    p5.add_argument("--orbits", type=int, help="Число периодических орбит на семейство")
    p5.add_argument("--no-separatrices", action="store_true", help="Не строить сепаратрисы")
    p5.add_argument("--eps", type=float, help="Сдвиг старта сепаратрис (доля масштаба)")
    p5.add_argument("--projection", choices=["SphereFrontBack", "PlaneXY"])
    p5.add_argument("--zoom", type=float)
    p5.add_argument("--workers", type=int)
    p5.add_argument("--format", choices=["csv", "json", "svg", "all"], default="all")

    p6 = sub.add_parser("collapse", parents=[common], help="Самоподобный коллапс на конусе Θ = 0")
    p6.add_argument("--angle", type=float, default=math.pi / 4, help="Полярный угол θ₀")
    p6.add_argument("--r0", type=float, default=1.0)

    p7 = sub.add_parser("zerocirc", parents=[common], help="Редукция при нулевой суммарной циркуляции")
    p7.add_argument("--state", type=str, help="X,Y для интегрирования")
    p7.add_argument("--t-end", type=float, default=0.0)
    p7.add_argument("--samples", type=int, default=1001)

    p8 = sub.add_parser("excel", parents=[common], help="Excel-сводка -> report.xlsx")
    p8.add_argument("--range", type=str, help="Добавить лист скана Γ₃ (a:b:шаг, только Γ₁ = Γ₂)")

    return ap


def _circulations(args: argparse.Namespace, cfg: utils.RunConfig, default: str | None = None) -> Circulations:
    if args.gamma:
        return Circulations.of(utils.parse_gamma(args.gamma))
    if cfg.circulations is not None:
        return Circulations.of(cfg.circulations)
    if default is not None:
        return Circulations.of(utils.parse_gamma(default))
    raise ConfigError("Не заданы циркуляции: укажите --gamma или поле 'circulations' в --config")


def _theta(args: argparse.Namespace, cfg: utils.RunConfig, default: float | None = None) -> float:
    if args.theta is not None:
        return float(utils.parse_rational(args.theta))
    if cfg.theta is not None:
        return cfg.theta
    if default is not None:
        return default
    raise ConfigError("Не задан уровень Θ: укажите --theta или поле 'theta' в --config")


def _out_dir(args: argparse.Namespace, params: dict[str, Any]) -> Path:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        return args.out
    return utils.init_hashed_output_dir({"cmd": args.cmd, **params})


def _positions(text: str, c: Circulations) -> VortexConfiguration:
    z = utils.parse_complex_list(text)
    if len(z) != 3:
        raise ConfigError(f"Ожидались три положения, получено {len(z)}")
    return VortexConfiguration.of(z, c)


def _state_dict(s: ReducedState) -> dict[str, Any]:
    return {
        "X": s.X,
        "Y": s.Y,
        "Z": s.Z,
        "Theta": s.Theta,
        "order": [lab + 1 for lab in s.labels],
        "h": reduced_hamiltonian(s),
        "distances_sq": {f"{i}{j}": v for (i, j), v in pairwise_distances(s).items()},
    }


def _cmd_simulate(args: argparse.Namespace, cfg: utils.RunConfig, tol: float) -> None:
    c = _circulations(args, cfg)
    vc = _positions(args.positions, c)
    out = _out_dir(args, {"gamma": c.as_tuple(), "positions": args.positions, "t_end": args.t_end, "tol": tol})
    t_eval = np.linspace(0.0, args.t_end, max(2, args.samples))
    traj = integrate_full(vc, (0.0, args.t_end), tol, t_eval=t_eval, collision_floor=args.collision_floor)
    utils.write_csv(out / "trajectory.csv", traj.to_frame())
    q = conserved_quantities(vc)
    summary = {
        "status": traj.status,
        "t_final": float(traj.times[-1]),
        "H": q.H,
        "M": q.M,
        "Theta": q.Theta,
        "max_drift": {col: traj.max_drift(col) for col in ("dH", "dMx", "dMy", "dTheta")},
        "closest_approach": None
        if traj.closest_approach is None
        else {
            "time": traj.closest_approach.time,
            "pair": list(traj.closest_approach.pair),
            "distance": traj.closest_approach.distance,
        },
    }
    utils.save_json(out / "summary.json", summary)
    _emit(summary)


def _cmd_reduce(args: argparse.Namespace, cfg: utils.RunConfig, tol: float) -> None:
    c = _circulations(args, cfg)
    if args.positions:
        s = reduce_configuration(_positions(args.positions, c))
    else:
        X, Y, Z = utils.parse_float_list(args.state)
        ordered, labels = reduction_order(c)
        s = project_to_quadric(ReducedState(X, Y, Z, _theta(args, cfg), ordered, labels))
    result: dict[str, Any] = {"state": _state_dict(s)}
    if args.t_end > 0:
        out = _out_dir(args, {"gamma": c.as_tuple(), "state": [s.X, s.Y, s.Z, s.Theta], "t_end": args.t_end})
        t_eval = np.linspace(0.0, args.t_end, max(2, args.samples))
        traj = integrate_reduced(s, (0.0, args.t_end), tol, t_eval=t_eval)
        utils.write_csv(out / "reduced_trajectory.csv", traj.to_frame())
        result["status"] = traj.status
        result["max_dh"] = traj.max_drift("dh")
    _emit(result)


def _cmd_equilibria(args: argparse.Namespace, cfg: utils.RunConfig) -> None:
    c = _circulations(args, cfg)
    theta = _theta(args, cfg)
    eqs = all_equilibria(c, theta)
    logger.info("Найдено равновесий: %d", len(eqs))
    if args.format == "csv":
        out = _out_dir(args, {"gamma": c.as_tuple(), "theta": theta})
        utils.write_csv(out / "equilibria.csv", equilibria_frame(eqs))
    _emit(
        {
            "circulations": c.as_tuple(),
            "theta": theta,
            "order": [lab + 1 for lab in reduction_order(c)[1]],
            "equilibria": [
                {
                    "label": e.label,
                    "kind": e.kind.value,
                    "X": e.state.X,
                    "Y": e.state.Y,
                    "Z": e.state.Z,
                    "eigenvalues": list(e.eigenvalues),
                    "stability": e.classification.value,
                }
                for e in eqs
            ],
            "singularities": [
                {"label": sp.label, "X": sp.X, "Z": sp.Z, "admissible": sp.admissible, "at_infinity": sp.at_infinity}
                for sp in singularities(c, theta).values()
            ],
        }
    )


def _cmd_scan(args: argparse.Namespace, cfg: utils.RunConfig) -> None:
    if args.axis == "symmetric":
        thetas = utils.parse_float_list(args.theta) if args.theta else [-1.0, 1.0]
        grid = utils.parse_range(args.range)
        out = _out_dir(args, {"axis": "symmetric", "range": args.range, "theta": thetas})
        df = bifurcation_scan([float(g) for g in grid], thetas, max_workers=args.workers)
        utils.write_csv(out / "scan_symmetric.csv", df)
    else:
        theta = _theta(args, cfg, default=1.0)
        out = _out_dir(args, {"axis": "trilinear", "step": args.step, "extent": args.extent, "theta": theta})
        df = region_grid(args.step, args.extent, theta)
        utils.write_csv(out / "scan_trilinear.csv", df)
    _emit({"rows": len(df), "out_dir": str(out)})


def _cmd_portrait(args: argparse.Namespace, cfg: utils.RunConfig, tol: float) -> None:
    c = _circulations(args, cfg)
    theta = _theta(args, cfg)
    options = dict(cfg.portrait)
    overrides = {
        "orbit_count": args.orbits,
        "eps": args.eps,
        "projection": args.projection,
        "zoom": args.zoom,
        "max_workers": args.workers,
    }
    options.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_separatrices:
        options["separatrices"] = False
    options.setdefault("tol", tol)
    spec = PortraitSpec.from_options(c, theta, options)
    out = _out_dir(args, {"gamma": c.as_tuple(), "theta": theta, "portrait": options})

    portrait = sample_portrait(spec)
    summary = portrait_summary(portrait)
    if args.format in ("csv", "all"):
        frame = portrait_frame(portrait)
        curves_dir = out / "curves"
        index = []
        for k, curve in enumerate(portrait.curves):
            path = curves_dir / f"curve_{k:03d}.csv"
            utils.write_csv(path, frame[frame["curve"] == k])
            index.append({"file": path.name, "kind": curve.kind.value, "source": curve.source,
                          "target": curve.target, "h": curve.h_level})
        summary["curves"] = index
    if args.format in ("json", "csv", "all"):
        utils.save_json(out / "portrait.json", summary)
    if args.format in ("svg", "all"):
        write_portrait_svg(portrait, out / "portrait.svg")
    _emit({"surface": summary["surface"], "counts": summary["counts"],
           "singular_line": summary["singular_line"], "out_dir": str(out)})


def _cmd_collapse(args: argparse.Namespace, cfg: utils.RunConfig, tol: float) -> None:
    c = _circulations(args, cfg, default="2/3,2/3,-1/3")
    rep = collapse_analysis(c, args.angle, args.r0, tol)
    _emit(
        {
            "theta0": rep.theta0,
            "r0": rep.r0,
            "dr_dt": rep.dr_dt_field,
            "dr_dt_formula": rep.dr_dt_formula,
            "predicted_time": rep.predicted_time,
            "integrated_time": rep.integrated_time,
            "relative_error": rep.relative_error,
            "h_formula_spread": rep.h_formula_spread,
            "status": rep.status,
        }
    )


def _cmd_zerocirc(args: argparse.Namespace, cfg: utils.RunConfig, tol: float) -> None:
    c = _circulations(args, cfg)
    g1, g2, g3 = c.as_floats()
    if abs(g1 + g2 + g3) > 1e-12 * max(abs(g1), abs(g2), abs(g3)):
        raise ConfigError(f"Суммарная циркуляция должна быть нулевой, получено {g1 + g2 + g3:g}")
    result: dict[str, Any] = {
        "singularities": zero_singularities(g1, g2),
        "equilibria": [
            {"X": e.X, "Y": e.Y, "stability": e.classification.value, "hessian_det": e.hessian_det}
            for e in zero_equilibria(g1, g2)
        ],
        "bracket_constant": bracket_constant(g1, g2),
    }
    if args.state:
        X, Y = utils.parse_float_list(args.state)
        result["h"] = h_zero(X, Y, g1, g2)
        if args.t_end > 0:
            out = _out_dir(args, {"gamma": c.as_tuple(), "state": [X, Y], "t_end": args.t_end})
            t_eval = np.linspace(0.0, args.t_end, max(2, args.samples))
            traj = integrate_zero_reduced(ZeroCircReducedState(X, Y, g1, g2), (0.0, args.t_end), tol, t_eval=t_eval)
            utils.write_csv(out / "zero_trajectory.csv", traj.to_frame())
            result["status"] = traj.status
    _emit(result)


def _cmd_excel(args: argparse.Namespace, cfg: utils.RunConfig) -> None:
    c = _circulations(args, cfg)
    theta = _theta(args, cfg)
    out = _out_dir(args, {"gamma": c.as_tuple(), "theta": theta, "range": args.range})
    scan_df = None
    if args.range:
        scan_df = bifurcation_scan([float(g) for g in utils.parse_range(args.range)], (theta,))
    path = generate_excel_report(c, theta, out / "report.xlsx", scan_df)
    _emit({"report": str(path)})


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Точка входа CLI; возвращает код выхода из VortexError.exit_code или 0."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
    ap = build_parser()
    try:
        args = ap.parse_args(normalize_argv(sys.argv[1:] if argv is None else argv))
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        cfg = utils.load_run_config(args.config)
        tol = args.tol if args.tol is not None else cfg.tol
        if tol <= 0:
            raise ConfigError("Допуск --tol должен быть положительным")

        if args.cmd == "simulate":
            _cmd_simulate(args, cfg, tol)
        elif args.cmd == "reduce":
            _cmd_reduce(args, cfg, tol)
        elif args.cmd == "equilibria":
            _cmd_equilibria(args, cfg)
        elif args.cmd == "scan":
            _cmd_scan(args, cfg)
        elif args.cmd == "portrait":
            _cmd_portrait(args, cfg, tol)
        elif args.cmd == "collapse":
            _cmd_collapse(args, cfg, tol)
        elif args.cmd == "zerocirc":
            _cmd_zerocirc(args, cfg, tol)
        elif args.cmd == "excel":
            _cmd_excel(args, cfg)
    except SystemExit as e:
        return int(e.code or 0)
    except (ConfigError, FileNotFoundError) as e:
        logger.error("Ошибка параметров: %s", e)
        return 1
    except NumericalError as e:
        logger.error("Численный отказ: %s", e)
        return e.exit_code
    except VortexError as e:
        logger.error("%s", e)
        return e.exit_code
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
