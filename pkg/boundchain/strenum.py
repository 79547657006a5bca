from enum import Enum


class StrEnum(str, Enum):
    """String valued enum that prints as its value in reports and f-strings."""

    def __str__(self) -> str:
        return str(self.value)
