from __future__ import annotations


class VortexError(Exception):
    """Базовая ошибка проекта."""

    exit_code = 2


class ConfigError(VortexError, ValueError):
    """Некорректные входные данные: флаги, файл параметров, предусловия на циркуляции."""

    exit_code = 1


class NumericalError(VortexError):
    """Численный отказ: сингулярность, интегратор, вырожденная элиминация."""


class SingularityError(NumericalError):
    def __init__(self, pair: tuple[int, int], message: str | None = None) -> None:
        self.pair = pair
        text = message or f"Сингулярность: совпадение вихрей {pair[0]} и {pair[1]}"
        super().__init__(text)


class IntegrationError(NumericalError):
    pass


class InvalidStateError(NumericalError):
    pass


class OffSurfaceError(InvalidStateError):
    pass


class InconsistentInvariantError(ConfigError):
    pass


class RelabelingRequiredError(ConfigError):
    """Γ₁+Γ₂ = 0 при γ₁ ≠ 0: нужна перестановка меток."""

    def __init__(self, permutation: tuple[int, int, int]) -> None:
        self.permutation = permutation
        super().__init__(f"Γ₁+Γ₂ = 0, требуется перестановка меток, например {permutation}")


class ZeroTotalCirculationError(ConfigError):
    def __init__(self) -> None:
        super().__init__("γ₁ = 0: используйте редукцию для нулевой суммарной циркуляции (zerocirc)")


class PreconditionError(ConfigError):
    pass


class DegenerateEliminationError(NumericalError):
    pass
