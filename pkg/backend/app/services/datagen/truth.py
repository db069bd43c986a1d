"""
Plain-text ground-truth sidecar written next to synthetic panels

One ``key = value`` pair per line, keys sorted, ``#`` starts a comment line. Numeric
values are written in their shortest round-trip form.
"""
from pathlib import Path
from typing import Dict, Mapping, Union

from app.core.exceptions import DataError

Value = Union[float, int, str]


def _format(value: Value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return repr(float(value))
    return str(value)


def write_ground_truth(path: Union[str, Path], mapping: Mapping[str, Value]) -> Path:
    """Write the sidecar"""
    path = Path(path)
    lines = ["# ground truth of the synthetic data-generating process"]
    for key in sorted(mapping):
        if "=" in key or key != key.strip() or not key:
            raise DataError(f"invalid ground-truth key '{key}'")
        lines.append(f"{key} = {_format(mapping[key])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_ground_truth(path: Union[str, Path]) -> Dict[str, Value]:
    """Parse a sidecar; numbers come back as floats, anything else as text"""
    truth: Dict[str, Value] = {}
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise DataError("expected 'key = value'", line=number)
        key, value = key.strip(), value.strip()
        if key in truth:
            raise DataError(f"duplicate key '{key}'", line=number)
        try:
            truth[key] = float(value)
        except ValueError:
            truth[key] = value
    return truth
