from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from .core_model import symmetric_invariants
from .portrait import OrbitKind, Portrait, Projection

logger = logging.getLogger(__name__)

PANEL = 360
MARGIN = 20

_CURVE_CLASS = {
    OrbitKind.PERIODIC: "periodic",
    OrbitKind.UNBOUNDED: "open",
    OrbitKind.RAY: "open",
    OrbitKind.HETEROCLINIC: "separatrix",
    OrbitKind.HOMOCLINIC: "separatrix",
}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _SphereView:
    """Единичная сфера, полюса при Y = ±1; слева передняя полусфера (Z > 0), справа задняя."""

    def __init__(self, portrait: Portrait) -> None:
        inv = symmetric_invariants(portrait.spec.circulations)
        theta = abs(portrait.spec.theta)
        self.a = math.sqrt(4 * float(inv.gamma3) / float(inv.gamma1)) / theta
        self.c = 1 / theta
        self.r = PANEL / 2 - MARGIN
        self.centers = (PANEL / 2, PANEL + PANEL / 2)
        self.width, self.height = 2 * PANEL, PANEL

    def map(self, p: np.ndarray) -> tuple[int, float, float]:
        u = np.array([self.a * p[0], self.a * p[1], self.c * p[2]])
        n = float(np.linalg.norm(u))
        if n > 0:
            u /= n
        face = 0 if u[2] >= 0 else 1
        cx = self.centers[face]
        sx = cx + self.r * u[0] if face == 0 else cx - self.r * u[0]
        return face, sx, PANEL / 2 - self.r * u[1]

    def frame(self) -> list[str]:
        return [
            f'  <circle class="frame" cx="{_fmt(cx)}" cy="{_fmt(PANEL / 2)}" r="{_fmt(self.r)}"/>'
            for cx in self.centers
        ]


class _PlaneView:
    def __init__(self, portrait: Portrait) -> None:
        pts = [abs(v) for e in portrait.equilibria for v in (e.state.X, e.state.Y)]
        pts += [abs(s.X) for s in portrait.singularities]
        scale = abs(portrait.spec.theta) or 1.0
        self.extent = 1.3 * max([scale, *pts]) / portrait.spec.zoom
        self.width = self.height = PANEL
        self.k = (PANEL / 2 - MARGIN) / self.extent

    def map(self, p: np.ndarray) -> tuple[int, float, float]:
        if abs(p[0]) > self.extent or abs(p[1]) > self.extent:
            return -1, 0.0, 0.0
        return 0, PANEL / 2 + self.k * p[0], PANEL / 2 - self.k * p[1]

    def frame(self) -> list[str]:
        return [f'  <rect class="frame" x="{MARGIN}" y="{MARGIN}" width="{PANEL - 2 * MARGIN}" height="{PANEL - 2 * MARGIN}"/>']


def _path_data(view: _SphereView | _PlaneView, samples: Iterable[np.ndarray]) -> str:
    parts: list[str] = []
    prev_face: int | None = None
    for p in samples:
        face, x, y = view.map(p)
        if face < 0:
            prev_face = None
            continue
        cmd = "L" if face == prev_face else "M"
        parts.append(f"{cmd}{_fmt(x)},{_fmt(y)}")
        prev_face = face
    return " ".join(parts)


def render_portrait_svg(portrait: Portrait) -> str:
    view: _SphereView | _PlaneView = (
        _SphereView(portrait) if portrait.projection is Projection.SPHERE_FRONT_BACK else _PlaneView(portrait)
    )
    body = view.frame()
    if portrait.singular_line and isinstance(view, _PlaneView):
        y = _fmt(PANEL / 2)
        body.append(f'  <path class="singularity" d="M{MARGIN},{y} L{PANEL - MARGIN},{y}"/>')
    for curve in portrait.curves:
        d = _path_data(view, curve.samples)
        if d:
            body.append(f'  <path class="{_CURVE_CLASS[curve.kind]}" d="{d}"/>')
    for sp in portrait.singularities:
        face, x, y = view.map(np.array([sp.X, 0.0, sp.Z]))
        if face >= 0:
            body.append(f'  <circle class="singularity" cx="{_fmt(x)}" cy="{_fmt(y)}" r="4"/>')
    for e in portrait.equilibria:
        face, x, y = view.map(e.state.as_array())
        if face >= 0:
            body.append(f'  <circle class="equilibrium" cx="{_fmt(x)}" cy="{_fmt(y)}" r="3.5"/>')
            body.append(f'  <text class="label" x="{_fmt(x + 5)}" y="{_fmt(y - 5)}">{e.label}</text>')

    g = ", ".join(str(v) for v in portrait.spec.circulations.as_tuple())
    title = f"Γ = ({g}), Θ = {portrait.spec.theta:g}, {portrait.surface.value}"

    template_path = Path(__file__).parent.parent / "templates" / "portrait.svg"
    try:
        template = template_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        logger.error("Файл шаблона не найден: %s", template_path)
        raise
    return (
        template.replace("__WIDTH__", str(view.width))
        .replace("__HEIGHT__", str(view.height))
        .replace("__TITLE__", title)
        .replace("__BODY__", "\n".join(body))
    )


def write_portrait_svg(portrait: Portrait, out_path: Path) -> Path:
    svg = render_portrait_svg(portrait)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg, encoding="utf-8")
    logger.info("SVG-портрет сохранён: %s (%d кривых)", out_path, len(portrait.curves))
    return out_path
