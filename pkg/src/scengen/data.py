"""Historical risk-factor panels laid out as flat state vectors.

Canonical factor order: every forward curve (domestic first, then the
foreign currencies in order, each by ascending tenor), followed by the
log-FX rates of the foreign currencies in order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np

from .errors import (
    EmptyPanel,
    InsufficientHistory,
    InvalidConfig,
    LengthMismatch,
    MissingCell,
    MissingColumn,
    NonFiniteValue,
    NonMonotoneDates,
    UnknownColumn,
)

DEFAULT_DELTA = 1.0 / 250.0


@dataclass(frozen=True)
class ForwardRate:
    currency: str
    tenor: float


@dataclass(frozen=True)
class LogFx:
    currency: str


def format_tenor(tenor: float) -> str:
    return format(float(tenor), "g")


@dataclass(frozen=True)
class FactorLayout:
    """Currencies (index 0 is domestic) and the shared tenor grid.

    An empty tenor grid is allowed and yields an FX-only layout.
    """

    currencies: tuple[str, ...]
    tenor_grid: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "currencies", tuple(str(c) for c in self.currencies))
        object.__setattr__(self, "tenor_grid", tuple(float(t) for t in self.tenor_grid))
        if not self.currencies:
            raise InvalidConfig("layout needs at least the domestic currency")
        if len(set(self.currencies)) != len(self.currencies):
            raise InvalidConfig(f"duplicate currency in {self.currencies}")
        grid = self.tenor_grid
        if grid and grid[0] < 0:
            raise InvalidConfig("first tenor must be >= 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfig(f"tenor grid not strictly increasing: {grid}")

    @property
    def domestic(self) -> str:
        return self.currencies[0]

    @property
    def p(self) -> int:
        return len(self.currencies) - 1

    @property
    def n(self) -> int:
        return len(self.tenor_grid)

    @property
    def J(self) -> int:
        return (self.p + 1) * self.n + self.p

    @property
    def tenors(self) -> np.ndarray:
        return np.asarray(self.tenor_grid, dtype=float)

    @property
    def factor_kinds(self) -> tuple:
        kinds = [ForwardRate(c, t) for c in self.currencies for t in self.tenor_grid]
        kinds += [LogFx(c) for c in self.currencies[1:]]
        return tuple(kinds)

    @property
    def column_names(self) -> tuple[str, ...]:
        names = []
        for kind in self.factor_kinds:
            if isinstance(kind, ForwardRate):
                names.append(f"{kind.currency}_f_{format_tenor(kind.tenor)}")
            else:
                names.append(f"{kind.currency}_logfx")
        return tuple(names)

    @property
    def rate_mask(self) -> np.ndarray:
        mask = np.zeros(self.J, dtype=bool)
        mask[: (self.p + 1) * self.n] = True
        return mask

    def curve_slice(self, alpha: int) -> slice:
        return slice(alpha * self.n, (alpha + 1) * self.n)

    def fx_index(self, alpha: int) -> int:
        """Column of the log-FX rate of foreign currency ``alpha`` (1-based)."""
        if not 1 <= alpha <= self.p:
            raise IndexError(f"no FX factor for currency index {alpha}")
        return (self.p + 1) * self.n + alpha - 1

    def index_of(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise UnknownColumn(f"unknown factor {name!r}") from None


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def load_layout(path: Union[str, os.PathLike]) -> tuple[FactorLayout, float]:
    """Read a layout file; returns the layout and Δ (default 1/250)."""
    kv = parse_key_values(Path(path).read_text())
    return layout_from_mapping(kv)


def layout_from_mapping(kv: dict[str, str]) -> tuple[FactorLayout, float]:
    if "currencies" not in kv:
        raise InvalidConfig("layout file must define 'currencies'")
    currencies = _split_list(kv["currencies"])
    try:
        tenors = [float(t) for t in _split_list(kv.get("tenors", ""))]
        delta = float(kv["delta"]) if "delta" in kv else DEFAULT_DELTA
    except ValueError as exc:
        raise InvalidConfig(f"bad number in layout file: {exc}") from None
    if not delta > 0:
        raise InvalidConfig("delta must be positive")
    return FactorLayout(tuple(currencies), tuple(tenors)), delta


def dump_layout(layout: FactorLayout, delta: float = DEFAULT_DELTA) -> str:
    return (
        f"currencies = {', '.join(layout.currencies)}\n"
        f"tenors = {', '.join(repr(t) for t in layout.tenor_grid)}\n"
        f"delta = {delta!r}\n"
    )


@dataclass(frozen=True, eq=False)
class HistoricalPanel:
    """K dated observations of the J risk factors.

    ``values`` is stored read-only; rates are absolute year-fraction
    forward rates and FX factors are natural logs of spot.
    """

    layout: FactorLayout
    dates: np.ndarray
    values: np.ndarray
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        dates = np.array(self.dates, dtype="datetime64[D]", copy=True)
        if values.ndim != 2 or values.shape[0] == 0:
            raise EmptyPanel("panel must be a nonempty K x J matrix")
        if values.shape[1] != self.layout.J:
            raise LengthMismatch(
                f"panel has {values.shape[1]} columns, layout expects J={self.layout.J}"
            )
        if dates.shape != (values.shape[0],):
            raise LengthMismatch("one date per row required")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise NonMonotoneDates("dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise NonFiniteValue(f"non-finite value at row {r}, column {self.layout.column_names[c]}")
        if not self.delta > 0:
            raise InvalidConfig("delta must be positive")
        values.setflags(write=False)
        dates.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", dates)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]

    def require_history(self, n_obs: int) -> None:
        if self.K < n_obs:
            raise InsufficientHistory(f"need at least {n_obs} observations, panel has {self.K}")

    def window(self, start: int, stop: int) -> "HistoricalPanel":
        """Sub-panel of rows ``start:stop`` (0-based, half open)."""
        return HistoricalPanel(self.layout, self.dates[start:stop], self.values[start:stop], self.delta)


Source = Union[bytes, str, os.PathLike, IO]


def _open_text(source: Source) -> IO[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def load_panel(source: Source, layout: FactorLayout, delta: float = DEFAULT_DELTA) -> HistoricalPanel:
    """Load and validate a panel CSV.

    Parameters
    ----------
    source : bytes, path, or file object
        CSV with a ``date`` column followed by factor columns named
        ``<CCY>_f_<tenor>`` or ``<CCY>_logfx``. Column order is free;
        values are reordered into the canonical layout order.
    layout : FactorLayout
    delta : float
        Observation spacing in year fractions.

    Raises
    ------
    MissingCell, NonMonotoneDates, UnknownColumn, MissingColumn, NonFiniteValue
    """
    stream = _open_text(source)
    try:
        rows = [r for r in csv.reader(line for line in stream if not line.startswith("#"))]
    finally:
        if isinstance(source, (str, os.PathLike)):
            stream.close()
    if not rows:
        raise EmptyPanel("empty CSV")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "date":
        raise InvalidConfig("first CSV column must be 'date'")
    expected = layout.column_names
    positions = {}
    for col, name in enumerate(header[1:], 1):
        if name not in expected:
            raise UnknownColumn(f"column {name!r} is not in the layout")
        positions[name] = col
    missing = [n for n in expected if n not in positions]
    if missing:
        raise MissingColumn(f"layout factors absent from CSV: {missing}")

    body = rows[1:]
    if not body:
        raise EmptyPanel("CSV has a header but no data rows")
    values = np.empty((len(body), layout.J))
    dates = []
    for r, row in enumerate(body, 1):
        if len(row) != len(header):
            raise MissingCell(r, header[len(row)] if len(row) < len(header) else "<extra>")
        if not row[0].strip():
            raise MissingCell(r, "date")
        dates.append(np.datetime64(row[0].strip(), "D"))
        for j, name in enumerate(expected):
            cell = row[positions[name]].strip()
            if not cell:
                raise MissingCell(r, name)
            try:
                x = float(cell)
            except ValueError:
                raise NonFiniteValue(f"row {r}, column {name!r}: not a number: {cell!r}") from None
            if not math.isfinite(x):
                raise NonFiniteValue(f"row {r}, column {name!r}: {cell}")
            values[r - 1, j] = x
    dates = np.array(dates, dtype="datetime64[D]")
    bad = np.nonzero(np.diff(dates) <= np.timedelta64(0, "D"))[0]
    if bad.size:
        raise NonMonotoneDates(f"date at data row {bad[0] + 2} ({dates[bad[0] + 1]}) is not after its predecessor")
    return HistoricalPanel(layout, dates, values, delta)


def write_panel(panel: HistoricalPanel, target: Union[str, os.PathLike, IO[str]]) -> None:
    """Write ``panel`` as CSV; floats use ``repr`` so reloading is exact."""
    own = isinstance(target, (str, os.PathLike))
    fh = open(target, "w", newline="", encoding="utf-8") if own else target
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date",) + panel.layout.column_names)
        for d, row in zip(panel.dates, panel.values):
            w.writerow([str(d)] + [repr(float(x)) for x in row])
    finally:
        if own:
            fh.close()


def compute_returns(panel_or_values) -> np.ndarray:
    """Observed returns ``Y[i+1] - Y[i]``; shape (K-1, J)."""
    values = panel_or_values.values if isinstance(panel_or_values, HistoricalPanel) else np.asarray(panel_or_values, float)
    if values.shape[0] < 2:
        raise InsufficientHistory("need K >= 2 observations to form returns")
    return np.diff(values, axis=0)


@dataclass(frozen=True)
class StateView:
    curves: dict
    log_fx: dict


def slice_state(state, layout: FactorLayout) -> StateView:
    """Named views of a J-vector: one curve per currency and one log-FX per foreign currency."""
    state = np.asarray(state)
    if state.shape != (layout.J,):
        raise LengthMismatch(f"state has shape {state.shape}, layout expects ({layout.J},)")
    curves = {c: state[layout.curve_slice(a)] for a, c in enumerate(layout.currencies)} if layout.n else {}
    fx = {c: state[layout.fx_index(a) : layout.fx_index(a) + 1] for a, c in enumerate(layout.currencies) if a >= 1}
    return StateView(curves, fx)
