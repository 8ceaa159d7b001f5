from __future__ import annotations

import json
from pathlib import Path

from vortexlab.domain.groups import FiniteGroup, UnitaryRep, group_from_definition
from vortexlab.exceptions import ConfigurationError, ValidationError


def load_group_file(path: Path) -> tuple[FiniteGroup, UnitaryRep]:
    """Read a user group (Cayley table plus representation matrices) from JSON."""
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"group file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"group file {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigurationError(f"group file {path} must hold a JSON object")
    try:
        return group_from_definition(payload)
    except (ValueError, ValidationError) as exc:
        raise ConfigurationError(f"group file {path}: {exc}") from None
