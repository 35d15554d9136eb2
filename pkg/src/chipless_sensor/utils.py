import io
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import pandas as pd

from chipless_sensor.exceptions import CsvFormatError

PathLike = Union[str, Path]


def format_number(x: Optional[float], digits: int = 9) -> str:
    """Render a float with `digits` significant digits; None becomes an empty field."""
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.{digits}g}"


def _decode(raw: bytes) -> str:
    """UTF-8 text of `raw`; undecodable bytes are a CsvFormatError on their line."""
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CsvFormatError("not UTF-8 text", raw[: e.start].count(b"\n") + 1) from e


def read_table(
    source: Union[PathLike, str], required: Sequence[str], text: bool = False
) -> Tuple[pd.DataFrame, Optional[str]]:
    """Read a numeric CSV table with an optional leading `#` metadata line.

    Args:
        source: File path, or the CSV text itself when `text` is True.
        required: Columns that must be present; they are coerced to float.
        text: Treat `source` as CSV content.

    Returns:
        The table and the metadata line (without '#'), if any.

    Raises:
        CsvFormatError: Undecodable bytes, missing columns or non-numeric cells, with
            the 1-based line.
    """
    content = source if text else _decode(Path(source).read_bytes())
    lines = content.splitlines()
    metadata = None
    header_line = 1
    if lines and lines[0].startswith("#"):
        metadata = lines[0][1:].strip()
        lines = lines[1:]
        header_line = 2
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or not lines[0].strip():
        raise CsvFormatError("missing header row", header_line)
    try:
        df = pd.read_csv(io.StringIO("\n".join(lines)), skip_blank_lines=False, dtype=str)
    except pd.errors.ParserError as e:
        raise CsvFormatError(f"unreadable CSV: {e}", header_line) from e
    df.columns = [c.strip() for c in df.columns]

    missing = [c for c in required if c not in df.columns]
    if missing:
        raise CsvFormatError(f"missing column(s): {', '.join(missing)}", header_line)
    for col in required:
        values = pd.to_numeric(df[col].str.strip(), errors="coerce")
        bad = values.isna()
        if bad.any():
            row = int(bad.to_numpy().nonzero()[0][0])
            raise CsvFormatError(f"column {col!r} is not numeric", header_line + 1 + row)
        df[col] = values.astype(float)
    return df, metadata


def table_to_csv(df: pd.DataFrame, metadata: Optional[str] = None, digits: int = 9) -> str:
    """Render a CSV with LF endings and an optional leading `#` line."""
    buf = io.StringIO()
    if metadata:
        buf.write(f"# {metadata}\n")
    df.to_csv(buf, index=False, lineterminator="\n", float_format=f"%.{digits}g")
    return buf.getvalue()


def write_table(
    path: PathLike, df: pd.DataFrame, metadata: Optional[str] = None, digits: int = 9
) -> None:
    Path(path).write_text(table_to_csv(df, metadata, digits), encoding="utf-8", newline="")


def format_key_values_markdown(title: str, items: Iterable[Tuple[str, object]]) -> str:
    """Format a titled list of `**key**: value` lines."""
    body = "\n".join(
        f"**{k}**: {format_number(v, 6) if isinstance(v, float) else v}" for k, v in items
    )
    return f"# {title}\n\n{body}\n"
