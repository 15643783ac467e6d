from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import pandas as pd

from .errors import ConfigError

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[1]

CSV_FLOAT_FORMAT = "%.17g"

Real = float | Fraction


def parse_rational(text: str | float | int) -> Real:
    """'1/3' -> Fraction(1, 3); '0.7' -> Fraction('0.7'); числа возвращаются как есть."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, float):
        return text
    s = str(text).strip()
    if not s:
        raise ConfigError("Пустое значение вместо числа")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"Не удалось разобрать число: {s!r}") from e


def parse_gamma(text: str) -> tuple[Real, Real, Real]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(f"Ожидались три циркуляции через запятую, получено: {text!r}")
    a, b, c = (parse_rational(p) for p in parts)
    return a, b, c


def parse_float_list(text: str) -> list[float]:
    return [float(parse_rational(p)) for p in text.split(",") if p.strip()]


def parse_complex_list(text: str) -> list[complex]:
    """'0,1,0.5+0.8j' -> [0j, (1+0j), (0.5+0.8j)]."""
    out = []
    for p in text.replace(";", ",").split(","):
        s = p.strip().replace(" ", "").replace("i", "j")
        if not s:
            continue
        try:
            out.append(complex(s))
        except ValueError as e:
            raise ConfigError(f"Не удалось разобрать комплексное число: {p!r}") from e
    return out


def parse_range(text: str) -> np.ndarray:
    """'start:stop:step' -> массив значений (stop включительно с допуском на округление)."""
    try:
        start, stop, step = (float(parse_rational(p)) for p in text.split(":"))
    except ValueError as e:
        raise ConfigError(f"Диапазон должен иметь вид start:stop:step, получено {text!r}") from e
    if step <= 0 or stop < start:
        raise ConfigError(f"Некорректный диапазон: {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def load_json(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(path)
    data = orjson.loads(path.read_bytes())
    if not isinstance(data, dict):
        raise ConfigError(f"Ожидался словарь, но получено: {type(data)}")
    return data


def _default(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(type(obj))


def dumps_json(data: dict[str, Any] | list[Any]) -> bytes:
    return orjson.dumps(data, default=_default, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)


def save_json(path: Path, data: dict[str, Any] | list[Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_json(data))


def write_csv(path: Path, df: pd.DataFrame) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("CSV сохранён: %s (%d строк)", path, len(df))


@dataclass(slots=True)
class RunConfig:
    """Параметры запуска из JSON-файла; флаги CLI перекрывают поля."""

    circulations: tuple[Real, Real, Real] | None = None
    theta: float | None = None
    tol: float = 1e-10
    portrait: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        circ = data.get("circulations")
        circulations = None
        if circ is not None:
            if not isinstance(circ, list) or len(circ) != 3:
                raise ConfigError("Поле 'circulations' должно быть списком из трёх чисел")
            a, b, c = (parse_rational(x) for x in circ)
            circulations = (a, b, c)
        theta = data.get("theta")
        portrait = data.get("portrait", {})
        if not isinstance(portrait, dict):
            raise ConfigError("Поле 'portrait' должно быть объектом")
        return cls(
            circulations=circulations,
            theta=None if theta is None else float(parse_rational(theta)),
            tol=float(parse_rational(data.get("tol", 1e-10))),
            portrait=portrait,
        )


def load_run_config(path: Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    cfg = RunConfig.from_dict(load_json(path))
    logger.info("Загружен файл параметров: %s", path)
    return cfg


def params_hash(params: dict[str, Any]) -> str:
    """SHA256 канонического JSON параметров запуска (полный hex)."""
    blob = orjson.dumps(params, default=_default, option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(blob).hexdigest()


def init_hashed_output_dir(params: dict[str, Any], hash_len: int = 10) -> Path:
    """
    Создаёт output/YYYY_MM_DD_{префикс хеша} для итогов запуска и возвращает путь.
    Повторный запуск с теми же параметрами пишет в тот же каталог.
    """
    hprefix = params_hash(params)[:hash_len]
    date_part = datetime.now().strftime("%Y_%m_%d")
    run_out_dir = PROJECT_ROOT / "output" / f"{date_part}_{hprefix}"
    run_out_dir.mkdir(parents=True, exist_ok=True)
    return run_out_dir
