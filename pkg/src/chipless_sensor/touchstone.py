"""Touchstone version 1 reader and writer for .s1p and .s2p files.

The option line reads `# <unit> <parameter> <format> R <resistance>`; tokens are
case-insensitive and any omitted token takes its default from `# GHZ S MA R 50`.
Two-port rows list 11, 21, 12, 22 and may be split over several physical lines on
input. Output is canonical: LF endings, comments, option line, then one row per
frequency with numbers at 9 significant digits.
"""

import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np

from chipless_sensor.exceptions import DomainError, TouchstoneFormatError, UnsupportedVersionError
from chipless_sensor.rfnet import (
    FrequencyGrid,
    OnePortSweep,
    TwoPortSweep,
    invert_2x2,
    y_to_z_oneport,
    zmatrix_to_smatrix,
)

logger = logging.getLogger(__name__)

FrequencyUnit = Literal["HZ", "KHZ", "MHZ", "GHZ"]
Parameter = Literal["S", "Z", "Y"]
DataFormat = Literal["RI", "MA", "DB"]

UNIT_SCALE = {"HZ": 1, "KHZ": 10**3, "MHZ": 10**6, "GHZ": 10**9}
PARAMETERS = ("S", "Z", "Y")
FORMATS = ("RI", "MA", "DB")
COLUMNS = {1: 3, 2: 9}
# Magnitude written for exact zeros in DB format (-300 dB).
DB_ZERO_MAGNITUDE = 1e-15


@dataclass(frozen=True)
class OptionLine:
    """Parsed `#` option line."""

    frequency_unit: FrequencyUnit = "GHZ"
    parameter: Parameter = "S"
    format: DataFormat = "MA"
    reference_resistance: float = 50.0

    def render(self) -> str:
        r = format(self.reference_resistance, ".9g")
        return f"# {self.frequency_unit} {self.parameter} {self.format} R {r}"


@dataclass(frozen=True)
class TouchstoneDocument:
    """A Touchstone file held as complex values.

    `values` has shape (N,) for one-port data and (N, 2, 2) for two-port data,
    in the parameter domain named by the option line (normalized for Z/Y, as on disk).
    """

    option_line: OptionLine
    grid: FrequencyGrid
    values: np.ndarray
    comments: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        n = len(self.grid)
        if vals.shape not in ((n,), (n, 2, 2)):
            raise DomainError(f"values of shape {vals.shape} do not fit a {n}-point grid")
        if not self.option_line.reference_resistance > 0:
            raise DomainError("reference resistance must be > 0")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "comments", tuple(self.comments))

    @property
    def ports(self) -> int:
        return 1 if self.values.ndim == 1 else 2


def _parse_option_line(body: str, line_no: int) -> OptionLine:
    unit, parameter, fmt, resistance = "GHZ", "S", "MA", 50.0
    tokens = body.split()
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in UNIT_SCALE:
            unit = tok
        elif tok in PARAMETERS:
            parameter = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneFormatError("option R needs a resistance value", line_no)
            try:
                resistance = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneFormatError(f"bad reference resistance {tokens[i + 1]!r}", line_no) from None
            if not math.isfinite(resistance) or resistance <= 0:
                raise TouchstoneFormatError("reference resistance must be > 0", line_no)
            i += 1
        else:
            raise TouchstoneFormatError(f"unknown option token {tokens[i]!r}", line_no)
        i += 1
    return OptionLine(unit, parameter, fmt, resistance)


def _to_complex(fmt: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.pi * b / 180.0)


def _from_complex(fmt: str, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if fmt == "RI":
        return v.real, v.imag
    angle = np.degrees(np.angle(v))
    mag = np.abs(v)
    if fmt == "MA":
        return mag, angle
    return 20.0 * np.log10(np.maximum(mag, DB_ZERO_MAGNITUDE)), angle


def _parse_number(token: str, line_no: int) -> float:
    try:
        x = float(token)
    except ValueError:
        raise TouchstoneFormatError(f"not a number: {token!r}", line_no) from None
    if not math.isfinite(x):
        raise TouchstoneFormatError(f"non-finite value {token!r}", line_no)
    return x


def _parse_frequency(token: str, scale: int, line_no: int) -> float:
    # Scaled in decimal so the same physical grid parses identically under any unit.
    try:
        d = Decimal(token)
    except InvalidOperation:
        raise TouchstoneFormatError(f"not a number: {token!r}", line_no) from None
    if not d.is_finite():
        raise TouchstoneFormatError(f"non-finite frequency {token!r}", line_no)
    return float(d * scale)


def parse(text: Union[bytes, str], ports: Optional[int] = None) -> TouchstoneDocument:
    """Parse Touchstone v1 content in a single pass.

    Args:
        text: File content.
        ports: 1 or 2 when known (e.g. from the file extension); otherwise inferred
            from the first data line (3 columns means one-port).

    Raises:
        TouchstoneFormatError: On the first malformed line, with its 1-based number.
        UnsupportedVersionError: On Touchstone v2 keyword lines.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    if ports not in (None, 1, 2):
        raise DomainError(f"only 1- and 2-port files are supported, got {ports}")

    option: Optional[OptionLine] = None
    comments: List[str] = []
    freqs: List[float] = []
    rows: List[List[float]] = []
    pending: List[str] = []
    pending_line = 0
    last_line = 0

    def finish_row(tokens: List[str], line_no: int):
        scale = UNIT_SCALE[option.frequency_unit]
        f = _parse_frequency(tokens[0], scale, line_no)
        if f <= 0:
            raise TouchstoneFormatError(f"frequency must be > 0, got {tokens[0]}", line_no)
        if freqs and f <= freqs[-1]:
            raise TouchstoneFormatError("frequencies are not strictly increasing", line_no)
        freqs.append(f)
        rows.append([_parse_number(t, line_no) for t in tokens[1:]])

    for line_no, raw in enumerate(text.splitlines(), start=1):
        last_line = line_no
        body, bang, comment = raw.partition("!")
        if bang:
            comments.append(comment.rstrip())
        body = body.strip()
        if not body:
            continue
        if body.startswith("["):
            raise UnsupportedVersionError(f"Touchstone v2 keyword {body.split()[0]!r} is not supported", line_no)
        if body.startswith("#"):
            if freqs or pending:
                raise TouchstoneFormatError("option line after data", line_no)
            if option is not None:
                logger.warning(f"line {line_no}: repeated option line ignored")
                continue
            option = _parse_option_line(body[1:], line_no)
            continue

        tokens = body.split()
        if option is None:
            # No option line: defaults apply only if this first data line parses.
            for t in tokens:
                try:
                    float(t)
                except ValueError:
                    raise TouchstoneFormatError("missing option line", line_no) from None
            option = OptionLine()
            logger.info("no option line, using defaults '# GHZ S MA R 50'")
        if ports is None:
            ports = 1 if len(tokens) == COLUMNS[1] else 2
        width = COLUMNS[ports]

        if ports == 1:
            if len(tokens) != width:
                raise TouchstoneFormatError(f"expected {width} columns, got {len(tokens)}", line_no)
            finish_row(tokens, line_no)
            continue

        if not pending:
            pending_line = line_no
        pending.extend(tokens)
        if len(pending) > width:
            raise TouchstoneFormatError(f"expected {width} columns per row, got {len(pending)}", line_no)
        if len(pending) == width:
            finish_row(pending, pending_line)
            pending = []

    if pending:
        raise TouchstoneFormatError(f"incomplete row: {len(pending)} of {COLUMNS[2]} columns", pending_line)
    if len(freqs) < 2:
        raise TouchstoneFormatError(f"need at least 2 data rows, got {len(freqs)}", max(last_line, 1))

    data = np.asarray(rows, dtype=float)
    pairs = _to_complex(option.format, data[:, 0::2], data[:, 1::2])
    if ports == 1:
        values = pairs[:, 0]
    else:
        # on-disk order 11, 21, 12, 22
        values = np.empty((len(freqs), 2, 2), dtype=complex)
        values[:, 0, 0] = pairs[:, 0]
        values[:, 1, 0] = pairs[:, 1]
        values[:, 0, 1] = pairs[:, 2]
        values[:, 1, 1] = pairs[:, 3]
    return TouchstoneDocument(option_line=option, grid=FrequencyGrid(np.asarray(freqs)), values=values, comments=tuple(comments))


def _fmt(x: float) -> str:
    return f"{x:.8E}"


def write(doc: TouchstoneDocument, fmt: Optional[DataFormat] = None) -> bytes:
    """Serialize a document; `fmt` overrides the document's data format."""
    fmt = (fmt or doc.option_line.format).upper()
    if fmt not in FORMATS:
        raise DomainError(f"unknown data format {fmt!r}")
    option = OptionLine(doc.option_line.frequency_unit, doc.option_line.parameter, fmt, doc.option_line.reference_resistance)
    scale = UNIT_SCALE[option.frequency_unit]

    if doc.ports == 1:
        cols = doc.values[:, None]
    else:
        v = doc.values
        cols = np.stack([v[:, 0, 0], v[:, 1, 0], v[:, 0, 1], v[:, 1, 1]], axis=1)
    a, b = _from_complex(fmt, cols)

    lines = [f"!{c}" for c in doc.comments]
    lines.append(option.render())
    for i, f in enumerate(doc.grid.points):
        nums = [_fmt(f / scale)]
        for j in range(cols.shape[1]):
            nums.append(_fmt(a[i, j]))
            nums.append(_fmt(b[i, j]))
        lines.append(" ".join(nums))
    return ("\n".join(lines) + "\n").encode("ascii")


def ports_from_path(path: Union[str, Path]) -> Optional[int]:
    """Port count from an .sNp extension, None if the extension says nothing."""
    suffix = Path(path).suffix.lower()
    if suffix == ".s1p":
        return 1
    if suffix == ".s2p":
        return 2
    return None


def load(path: Union[str, Path]) -> TouchstoneDocument:
    """Read a Touchstone file from disk."""
    return parse(Path(path).read_bytes(), ports=ports_from_path(path))


def save(path: Union[str, Path], doc: TouchstoneDocument, fmt: Optional[DataFormat] = None) -> None:
    """Write a Touchstone file to disk."""
    Path(path).write_bytes(write(doc, fmt))


def to_oneport_sweep(doc: TouchstoneDocument) -> OnePortSweep:
    """Convert a one-port document to the impedance domain."""
    if doc.ports != 1:
        raise DomainError("document is not one-port")
    r = doc.option_line.reference_resistance
    if doc.option_line.parameter == "S":
        return OnePortSweep.from_s11(doc.grid, doc.values, r)
    if doc.option_line.parameter == "Z":
        z = doc.values * r
    else:
        z = y_to_z_oneport(doc.values / r)
    return OnePortSweep(grid=doc.grid, z=z, reference_impedance=r)


def to_twoport_sweep(doc: TouchstoneDocument) -> TwoPortSweep:
    """Convert a two-port document to an S sweep at its reference resistance."""
    if doc.ports != 2:
        raise DomainError("document is not two-port")
    r = doc.option_line.reference_resistance
    if doc.option_line.parameter == "S":
        return TwoPortSweep(grid=doc.grid, s=doc.values, reference_impedance=r)
    if doc.option_line.parameter == "Z":
        z = doc.values * r
    else:
        z = invert_2x2(doc.values / r)
    return zmatrix_to_smatrix(doc.grid, z, r)


def from_oneport_sweep(
    sweep: OnePortSweep,
    parameter: Parameter = "S",
    fmt: DataFormat = "RI",
    unit: FrequencyUnit = "HZ",
    comments: Tuple[str, ...] = (),
) -> TouchstoneDocument:
    """Wrap a one-port sweep as a document in the requested parameter domain."""
    r = sweep.reference_impedance
    if parameter == "S":
        values = sweep.s11
    elif parameter == "Z":
        values = sweep.z / r
    else:
        values = r / sweep.z
    return TouchstoneDocument(OptionLine(unit, parameter, fmt, r), sweep.grid, values, comments)


def from_twoport_sweep(
    sweep: TwoPortSweep,
    fmt: DataFormat = "RI",
    unit: FrequencyUnit = "HZ",
    comments: Tuple[str, ...] = (),
) -> TouchstoneDocument:
    """Wrap a two-port sweep as an S-parameter document."""
    return TouchstoneDocument(OptionLine(unit, "S", fmt, sweep.reference_impedance), sweep.grid, sweep.s, comments)
