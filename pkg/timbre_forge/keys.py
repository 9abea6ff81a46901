"""
Keys used by timbre_forge to name domains and translation directions.
"""

from __future__ import annotations

import re
from typing import TYPE_CHECKING

from attrs import field, frozen

from .exceptions import ConfigError

if TYPE_CHECKING:
    from typing import Self

DOMAIN_NAME_PATTERN = r"[A-Za-z0-9_\-.]+"

PAIR_NAMESPACE = "pair-v1"
PAIR_PATTERN = rf"({DOMAIN_NAME_PATTERN})\+({DOMAIN_NAME_PATTERN})"

_domain_name_regex = re.compile(rf"^{DOMAIN_NAME_PATTERN}$")


def validate_domain_name(name: str) -> str:
    """Return ``name`` if it is a usable domain name, raise ConfigError otherwise."""
    if not isinstance(name, str) or not _domain_name_regex.match(name):
        raise ConfigError(f"Invalid domain name {name!r}. Use letters, digits, '_', '-' or '.'")
    return name


def _check_name(_instance, attribute, value):
    try:
        validate_domain_name(value)
    except ConfigError as err:
        raise ConfigError(f"Invalid {attribute.name}", {attribute.name: str(err)}) from err


@frozen
class DomainPair:
    """
    A directed translation between two timbre domains.

    Format: pair-v1:{source}+{target} (the namespace prefix is optional when parsing).
    """

    CANONICAL_NAMESPACE = PAIR_NAMESPACE

    source: str = field(validator=_check_name)
    target: str = field(validator=_check_name)

    _pair_regex = re.compile(rf"^(?:{PAIR_NAMESPACE}:)?{PAIR_PATTERN}$")

    def __attrs_post_init__(self):
        if self.source == self.target:
            raise ConfigError("A domain pair needs two different domains", {"pair": f"{self.source}+{self.target}"})

    @classmethod
    def from_string(cls, serialized: str) -> Self:
        """Return an instance of this class constructed from the given string."""
        match = cls._pair_regex.match(serialized.strip())
        if not match:
            raise ConfigError(
                f"Invalid pair {serialized!r}", {"pair": "Invalid format. Use: '{source}+{target}'"}
            )
        return cls(*match.groups())

    def reversed(self) -> Self:
        """Return the inverse direction."""
        return type(self)(self.target, self.source)

    def __str__(self) -> str:
        return f"{self.source}+{self.target}"
