from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from fractions import Fraction
from typing import Literal

import numpy as np
import sympy
from sympy import QQ, Poly

from .errors import ConfigError, DegenerateEliminationError

logger = logging.getLogger(__name__)

x, y = sympy.symbols("x y")

Var = Literal["x", "y"]
Rat = Fraction | int
Entry = Fraction | Poly


def _rational(v: Rat | sympy.Rational) -> sympy.Rational:
    if isinstance(v, Fraction):
        return sympy.Rational(v.numerator, v.denominator)
    return sympy.Rational(v)


def to_fraction(v: sympy.Expr | Rat) -> Fraction:
    r = sympy.Rational(v)
    return Fraction(int(r.p), int(r.q))


def univariate(*coeffs: Rat, var: sympy.Symbol = x) -> Poly:
    """Многочлен над ℚ по коэффициентам от младшей степени к старшей."""
    if not coeffs:
        return Poly(0, var, domain=QQ)
    return Poly([_rational(c) for c in reversed(coeffs)], var, domain=QQ)


def from_roots(roots_: Iterable[Rat], lead: Rat = 1, var: sympy.Symbol = x) -> Poly:
    p = Poly(_rational(lead), var, domain=QQ)
    for r in roots_:
        p = p * Poly(var - _rational(r), var, domain=QQ)
    return p


def bivariate_variables() -> tuple[Poly, Poly]:
    return Poly(x, x, y, domain=QQ), Poly(y, x, y, domain=QQ)


def linear(cx: Rat, cy: Rat, c0: Rat) -> Poly:
    return Poly(_rational(cx) * x + _rational(cy) * y + _rational(c0), x, y, domain=QQ)


def _bivariate(p: Poly) -> Poly:
    return p if p.gens == (x, y) else Poly(p.as_expr(), x, y, domain=QQ)


def coefficients_in(p: Poly, var: Var) -> list[Poly]:
    """Коэффициенты при var^k как многочлены от второй переменной (k от 0 до степени)."""
    p = _bivariate(p)
    other = y if var == "x" else x
    n = p.degree(x if var == "x" else y)
    buckets: dict[int, dict[tuple[int], sympy.Expr]] = {}
    for (i, j), c in p.terms():
        k, o = (i, j) if var == "x" else (j, i)
        buckets.setdefault(k, {})[(o,)] = c
    return [
        Poly.from_dict(buckets[k], other, domain=QQ) if k in buckets else Poly(0, other, domain=QQ)
        for k in range(n + 1)
    ]


def numeric(p: Poly) -> Callable[..., float]:
    """Быстрая численная функция от образующих p."""
    return sympy.lambdify(p.gens, p.as_expr(), modules="math")


def _formal_sylvester(a_high: Sequence[Entry], b_high: Sequence[Entry], zero: Entry) -> list[list[Entry]]:
    m, n = len(a_high) - 1, len(b_high) - 1
    size = m + n
    rows: list[list[Entry]] = []
    for r in range(n):
        row = [zero] * size
        row[r : r + m + 1] = list(a_high)
        rows.append(row)
    for r in range(m):
        row = [zero] * size
        row[r : r + n + 1] = list(b_high)
        rows.append(row)
    return rows


def _check_univariate(p: Poly) -> None:
    if p.is_zero:
        raise ConfigError("Операция не определена для нулевого многочлена")
    if not p.is_univariate:
        raise ConfigError(f"Ожидался многочлен одной переменной, получено {p.gens}")


def sylvester_matrix(a: Poly, b: Poly) -> list[list[Fraction]]:
    """Матрица Сильвестра размера deg a + deg b (строки a сверху, коэффициенты от старших)."""
    _check_univariate(a)
    _check_univariate(b)
    a_high = [to_fraction(c) for c in a.all_coeffs()]
    b_high = [to_fraction(c) for c in b.all_coeffs()]
    return _formal_sylvester(a_high, b_high, Fraction(0))  # type: ignore[return-value]


def _is_zero(v: Entry) -> bool:
    return v.is_zero if isinstance(v, Poly) else v == 0


def _exact_div(a: Entry, b: Entry) -> Entry:
    if isinstance(a, Poly):
        return a.exquo(b)
    return a / b


def _bareiss_det(matrix: list[list[Entry]], one: Entry) -> Entry:
    """
    Бесдробное исключение Барейсса. Все деления точные: над ℚ для чисел
    и в кольце ℚ[t] для многочленов.
    """
    m = [list(row) for row in matrix]
    n = len(m)
    if n == 0:
        return one
    zero = one * 0
    sign = 1
    prev = one
    for k in range(n - 1):
        if _is_zero(m[k][k]):
            swap = next((i for i in range(k + 1, n) if not _is_zero(m[i][k])), None)
            if swap is None:
                return zero
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        pivot = m[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = _exact_div(m[i][j] * pivot - m[i][k] * m[k][j], prev)
            m[i][k] = zero
        prev = pivot
    return m[n - 1][n - 1] * sign


def resultant(a: Poly, b: Poly) -> Fraction:
    _check_univariate(a)
    _check_univariate(b)
    if a.degree() == 0:
        return to_fraction(a.LC()) ** b.degree()
    if b.degree() == 0:
        return to_fraction(b.LC()) ** a.degree()
    det = _bareiss_det(sylvester_matrix(a, b), Fraction(1))  # type: ignore[arg-type]
    return Fraction(det)  # type: ignore[arg-type]


def resultant_in(var: Var, a: Poly, b: Poly) -> Poly:
    """
    Исключает переменную var: определитель матрицы Сильвестра, элементы которой —
    многочлены от второй переменной; Барейсс ведётся в кольце ℚ[t].
    """
    if a.is_zero or b.is_zero:
        raise ConfigError("Результант нулевого многочлена не определён")
    other = y if var == "x" else x
    ca, cb = coefficients_in(a, var), coefficients_in(b, var)
    m, n = len(ca) - 1, len(cb) - 1
    if m == 0:
        return ca[0] ** n
    if n == 0:
        return cb[0] ** m
    zero, one = Poly(0, other, domain=QQ), Poly(1, other, domain=QQ)
    det = _bareiss_det(_formal_sylvester(ca[::-1], cb[::-1], zero), one)
    assert isinstance(det, Poly)
    return det


def discriminant(p: Poly) -> Fraction:
    """(−1)^{n(n−1)/2} res(p, p′) / lead(p); для квадратного трёхчлена ровно b²−4ac."""
    _check_univariate(p)
    n = p.degree()
    if n < 2:
        raise ConfigError("Дискриминант определён для степени не ниже 2")
    sign = -1 if (n * (n - 1) // 2) % 2 else 1
    return sign * resultant(p, p.diff()) / to_fraction(p.LC())


def _polish(c: np.ndarray, dc: np.ndarray, z: complex, max_iter: int = 50) -> complex:
    fz = abs(np.polyval(c, z))
    for _ in range(max_iter):
        d = np.polyval(dc, z)
        if d == 0 or fz == 0:
            break
        z_new = z - np.polyval(c, z) / d
        f_new = abs(np.polyval(c, z_new))
        if f_new >= fz:
            break
        z, fz = complex(z_new), f_new
    return z


def _cubic_roots(a: float, b: float, c: float, d: float) -> list[complex]:
    B, C, D = b / a, c / a, d / a
    p = C - B * B / 3.0
    q = 2.0 * B**3 / 27.0 - B * C / 3.0 + D
    shift = -B / 3.0
    disc = -(4.0 * p**3 + 27.0 * q * q)
    if p == 0.0 and q == 0.0:
        return [complex(shift)] * 3
    if disc > 0.0:
        # три вещественных корня, тригонометрическая форма
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)))
        phi = math.acos(arg) / 3.0
        return [complex(r * math.cos(phi - 2.0 * math.pi * k / 3.0) + shift) for k in range(3)]
    s = math.sqrt(max(q * q / 4.0 + p**3 / 27.0, 0.0))
    t = float(np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s))
    real = t + shift
    # деление на (x − real): x² + (B + real)x + (C + real(B + real))
    bb = B + real
    cc = C + real * bb
    sq = cmath.sqrt(bb * bb - 4.0 * cc)
    return [complex(real), (-bb + sq) / 2.0, (-bb - sq) / 2.0]


def roots(p: Poly) -> list[complex]:
    """
    Корни многочлена: аналитически для степени ≤ 3, иначе собственные значения
    сопровождающей матрицы; каждый корень уточняется методом Ньютона.
    """
    _check_univariate(p)
    if p.degree() < 1:
        raise ConfigError("Корни определены для степени ≥ 1")
    c = np.array([float(v) for v in p.all_coeffs()])
    deg = len(c) - 1
    if deg == 1:
        raw = [complex(-c[1] / c[0])]
    elif deg == 2:
        a, b, cc = c[0], c[1], c[2]
        sq = cmath.sqrt(b * b - 4 * a * cc)
        q = -0.5 * (b + sq) if b >= 0 else -0.5 * (b - sq)
        raw = [q / a, cc / q] if q != 0 else [complex(0.0), complex(0.0)]
    elif deg == 3:
        raw = _cubic_roots(c[0], c[1], c[2], c[3])
    else:
        raw = [complex(z) for z in np.roots(c)]

    dc = np.polyder(c)
    out = []
    for z in raw:
        z = _polish(c, dc, complex(z))
        if abs(z.imag) < 1e-12 * max(1.0, abs(z)):
            z = complex(z.real, 0.0)
        out.append(z)
    return sorted(out, key=lambda z: (z.real, z.imag))


def eliminate_three(f: Poly, g: Poly, h: Poly, *, known_factors: Sequence[Poly] = ()) -> Fraction:
    """
    Условие общего корня трёх многочленов от (x, y):
    A(x) = res(f, g; y), B(x) = res(g, h; y), затем res(A, B; x).
    Известные общие множители A (например, сингулярности) делятся до исключения x.
    Обращение в ноль — необходимое, но не достаточное условие.
    """
    a = resultant_in("y", f, g)
    for factor in known_factors:
        q, r = a.div(factor)
        if r.is_zero and not a.is_zero:
            a = q
        else:
            logger.debug("Множитель %s не делит A(x), пропускаем", factor.as_expr())
    b = resultant_in("y", g, h)
    if a.is_zero or b.is_zero:
        raise DegenerateEliminationError("Промежуточный результант тождественно равен нулю")
    return resultant(a, b)
