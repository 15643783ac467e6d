from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from .core_model import Circulations, symmetric_invariants
from .equilibria import (
    Equilibrium,
    Stability,
    TrilinearPoint,
    all_equilibria,
    discriminant_p3,
    region_classify,
    stability_boundary_value,
)
from .errors import VortexError
from .reduction import classify_surface, singularities

logger = logging.getLogger(__name__)


def equilibria_frame(eqs: list[Equilibrium]) -> pd.DataFrame:
    rows = [
        {
            "Метка": e.label,
            "Тип": e.kind.value,
            "X": e.state.X,
            "Y": e.state.Y,
            "Z": e.state.Z,
            "λ²": e.lambda_squared,
            "Устойчивость": e.classification.value,
            "r (замкнутая форма)": e.r_closed_form,
        }
        for e in eqs
    ]
    return pd.DataFrame(rows, columns=["Метка", "Тип", "X", "Y", "Z", "λ²", "Устойчивость", "r (замкнутая форма)"])


def singularities_frame(c: Circulations, theta: float) -> pd.DataFrame:
    rows = [
        {
            "Пара": sp.label,
            "X": sp.X,
            "Z": sp.Z,
            "На бесконечности": sp.at_infinity,
            "Допустима": sp.admissible,
        }
        for sp in singularities(c, theta).values()
    ]
    return pd.DataFrame(rows, columns=["Пара", "X", "Z", "На бесконечности", "Допустима"])


def _summary_rows(c: Circulations, theta: float, eqs: list[Equilibrium]) -> list[tuple[str, object]]:
    inv = symmetric_invariants(c)
    g1, g2, g3 = c.as_floats()
    rows: list[tuple[str, object]] = [
        ("Γ₁, Γ₂, Γ₃", ", ".join(str(v) for v in c.as_tuple())),
        ("Θ", theta),
        ("γ₁", float(inv.gamma1)),
        ("γ₂", float(inv.gamma2)),
        ("γ₃", float(inv.gamma3)),
        ("Поверхность", classify_surface(c, theta).value),
        ("Равновесий", len(eqs)),
        ("Сёдел", sum(e.classification is Stability.SADDLE for e in eqs)),
    ]
    total = g1 + g2 + g3
    region = region_classify(TrilinearPoint(g1 / total, g2 / total, g3 / total), theta if theta != 0 else 1.0)
    rows.append(("Квартика дельтоида", region.deltoid_value))
    rows.append(("Коллинеарных (по области)", region.collinear_count))
    rows.append(("На границе области", region.boundary))
    try:
        rows.append(("Дискриминант p₃ (норм.)", discriminant_p3(c, theta).scaled))
        rows.append(("Граница устойчивости", stability_boundary_value(c, theta).value))
    except VortexError as e:
        logger.warning("Полиномиальные инварианты не вычислены: %s", e)
    return rows


def generate_excel_report(
    c: Circulations,
    theta: float,
    output_path: Path,
    scan_df: pd.DataFrame | None = None,
) -> Path:
    """
    Excel-сводка по точке параметров: равновесия с устойчивостью, сингулярности,
    параметры области и (необязательно) таблица бифуркационного скана.
    """
    eqs = all_equilibria(c, theta)
    eq_df = equilibria_frame(eqs)
    sing_df = singularities_frame(c, theta)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    with pd.ExcelWriter(
        output_path,
        engine="xlsxwriter",
        engine_kwargs={"options": {"strings_to_urls": False}},
    ) as writer:
        workbook = writer.book
        fmt_title = workbook.add_format({"bold": True, "font_size": 12})
        fmt_header = workbook.add_format({"bold": True, "bg_color": "#F2F2F2", "border": 1})
        fmt_float = workbook.add_format({"num_format": "0.000000000"})
        fmt_hint = workbook.add_format({"italic": True, "font_color": "#666666"})

        ws_sum = workbook.add_worksheet("Общее")
        writer.sheets["Общее"] = ws_sum
        ws_sum.write(0, 0, "Параметры", fmt_title)
        ws_sum.write_row(1, 0, ["Показатель", "Значение"], fmt_header)
        for i, (name, value) in enumerate(_summary_rows(c, theta, eqs), start=2):
            ws_sum.write(i, 0, name)
            ws_sum.write(i, 1, value)
        ws_sum.set_column(0, 0, 28)
        ws_sum.set_column(1, 1, 22)

        ws_eq = workbook.add_worksheet("Равновесия")
        writer.sheets["Равновесия"] = ws_eq
        ws_eq.write(0, 0, "Относительные равновесия", fmt_title)
        eq_df.to_excel(writer, sheet_name="Равновесия", startrow=1, index=False)
        n_eq = len(eq_df)
        ws_eq.autofilter(1, 0, 1 + n_eq, len(eq_df.columns) - 1)
        ws_eq.set_column(0, 1, 14)
        ws_eq.set_column(2, 5, 16, fmt_float)
        ws_eq.set_column(6, 7, 18)
        if n_eq > 0:
            ws_eq.conditional_format(2, 5, 1 + n_eq, 5, {"type": "data_bar"})
        else:
            ws_eq.write(3, 0, "Равновесий на этом листе Θ нет", fmt_hint)
        ws_eq.freeze_panes(2, 0)

        ws_s = workbook.add_worksheet("Особенности")
        writer.sheets["Особенности"] = ws_s
        ws_s.write(0, 0, "Образы столкновений пар", fmt_title)
        sing_df.to_excel(writer, sheet_name="Особенности", startrow=1, index=False)
        ws_s.set_column(0, 0, 8)
        ws_s.set_column(1, 2, 16, fmt_float)
        ws_s.set_column(3, 4, 18)

        if scan_df is not None:
            ws_scan = workbook.add_worksheet("Скан")
            writer.sheets["Скан"] = ws_scan
            ws_scan.write(0, 0, "Бифуркационный скан Γ₁ = Γ₂", fmt_title)
            scan_df.to_excel(writer, sheet_name="Скан", startrow=1, index=False)
            ws_scan.autofilter(1, 0, 1 + len(scan_df), len(scan_df.columns) - 1)
            ws_scan.set_column(0, len(scan_df.columns) - 1, 14)
            ws_scan.freeze_panes(2, 0)

    logger.info("Excel-отчёт сохранён: %s", output_path)
    return output_path
