"""Helper utility functions."""
from typing import Any, List, Optional


def build_sample_id(seed: int, index: int) -> str:
    """Build a sample id using the required format."""
    return f"s{seed}_{index:05d}"


def parse_list(value: Any) -> Any:
    """Parse a comma-separated string into a list; other values pass through unchanged."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def empty_to_none(value: Any) -> Optional[Any]:
    """Map blank strings (and the literal ``none``) to None."""
    if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
        return None
    return value


def format_number(value: float) -> str:
    """Shortest text form that parses back to exactly the same float."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def format_value(value: Any) -> str:
    """Render a config value in the run config file syntax."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def strictly_increasing(values: List[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))
