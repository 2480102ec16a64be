"""Data model and ingestion for firm panels and province-level side tables.

Input tables are delimiter-separated text with a header row (comma by
default, tab for ``.tsv``).  Provinces are referred to by abbreviation or
numeric id; industries by a sector letter plus a two-digit subsector.

Column layouts::

    firms      firm_id, province, sector, subsector, list_year, delist_year,
               year, revenue, employees
    distances  i, j, d_km, v_km, b_hops, t_transit_h, t_train_h, t_drive_h
    macro      province, year, population, gdp_pc, urban_area, land_area, trade
    rail       i, j, connected_year
    provinces  id, name, abbreviation
    industries sector, subsector[, name]

Firm tables carry one row per firm-year observation; the firm-level fields
are repeated on each row.  ``year``, ``revenue`` and ``employees`` may be
empty, as may ``delist_year`` (still listed) and ``connected_year`` (never
connected).
"""

import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InputError
from .tables import parse_float, parse_int, read_table, render_rows

log = logging.getLogger(__name__)

FIRM_COLUMNS = ("firm_id", "province", "sector", "subsector", "list_year",
                "delist_year", "year", "revenue", "employees")
DISTANCE_COLUMNS = ("i", "j", "d_km", "v_km", "b_hops", "t_transit_h", "t_train_h", "t_drive_h")
MACRO_COLUMNS = ("province", "year", "population", "gdp_pc", "urban_area", "land_area", "trade")
RAIL_COLUMNS = ("i", "j", "connected_year")

_SUBSECTOR = re.compile(r"^\d{2}$")
_SECTOR = re.compile(r"^[A-Z]$")


@dataclass(frozen=True, order=True)
class IndustryCode:
    sector: str
    subsector: str
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not _SECTOR.match(self.sector):
            raise InputError(f"sector must be one uppercase letter, got {self.sector!r}")
        if not _SUBSECTOR.match(self.subsector):
            raise InputError(f"subsector must be two digits, got {self.subsector!r}")

    @property
    def code(self):
        return self.sector + self.subsector

    @classmethod
    def parse(cls, text, name=""):
        text = text.strip()
        return cls(text[:1], text[1:], name)

    def __str__(self):
        return self.code


@dataclass(frozen=True)
class Province:
    id: int
    name: str
    abbreviation: str

    def __str__(self):
        return self.abbreviation


class Registry:
    """Ordered, immutable collection of provinces or industries.

    Lookups accept the display label (abbreviation or industry code) and, for
    provinces, the numeric id.
    """

    def __init__(self, items, keys):
        self.items = tuple(items)
        self._index = {}
        for pos, (item, item_keys) in enumerate(zip(self.items, keys)):
            for k in item_keys:
                if k in self._index and self._index[k] != pos:
                    raise InputError(f"duplicate registry key {k!r}")
                self._index[k] = pos

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, pos):
        return self.items[pos]

    def __contains__(self, key):
        return key in self._index

    def __eq__(self, other):
        return isinstance(other, Registry) and self.items == other.items

    def index(self, key):
        try:
            return self._index[key]
        except KeyError:
            raise InputError(f"unknown registry key {key!r}") from None

    def get(self, key):
        return self._index.get(key)

    @property
    def labels(self):
        return [str(item) for item in self.items]


def province_registry(provinces):
    provinces = list(provinces)
    ids = [p.id for p in provinces]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise InputError("province ids must be dense and unique, starting at 1")
    provinces.sort(key=lambda p: p.id)
    return Registry(provinces, [(p.abbreviation, str(p.id)) for p in provinces])


def industry_registry(codes):
    codes = sorted(set(codes))
    owner = {}
    for c in codes:
        if owner.setdefault(c.subsector, c.sector) != c.sector:
            raise InputError(f"subsector {c.subsector} listed under sectors "
                             f"{owner[c.subsector]} and {c.sector}")
    return Registry(codes, [(c.code,) for c in codes])


def default_provinces():
    """The 31 mainland provinces with their conventional abbreviations."""
    ref = resources.files("colearn").joinpath("data/provinces.csv")
    with resources.as_file(ref) as path:
        return read_provinces(path)


def read_provinces(path):
    _, rows = read_table(path, ("id", "name", "abbreviation"))
    provinces = []
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        provinces.append(Province(parse_int(row["id"], "id", where), row["name"], row["abbreviation"]))
    return province_registry(provinces)


def read_industries(path):
    _, rows = read_table(path, ("sector", "subsector"), ("name",))
    codes = [IndustryCode(row["sector"], row["subsector"], row.get("name", "")) for _, row in rows]
    if len(set(codes)) != len(codes):
        raise InputError(f"{path}: duplicate industry codes")
    return industry_registry(codes)


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelTensor:
    """Firm counts ``counts[i, a, t]`` over a contiguous range of years."""

    provinces: Registry
    industries: Registry
    first_year: int
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 3 or c.shape[:2] != (len(self.provinces), len(self.industries)):
            raise InputError(f"counts shape {c.shape} does not match registries")
        if not np.issubdtype(c.dtype, np.integer):
            raise InputError("counts must be integers")
        if (c < 0).any():
            raise InputError("counts must be nonnegative")
        object.__setattr__(self, "counts", _readonly(c.astype(np.int64)))

    @property
    def years(self):
        return range(self.first_year, self.first_year + self.counts.shape[2])

    @property
    def last_year(self):
        return self.first_year + self.counts.shape[2] - 1

    def year_index(self, year):
        k = year - self.first_year
        if not 0 <= k < self.counts.shape[2]:
            raise InputError(f"year {year} outside panel range {self.first_year}-{self.last_year}")
        return k

    def at(self, year):
        """Province x industry counts for one year."""
        return self.counts[:, :, self.year_index(year)]

    def same_layout(self, other):
        return (self.provinces == other.provinces and self.industries == other.industries
                and self.first_year == other.first_year
                and self.counts.shape == other.counts.shape)


@dataclass(frozen=True, eq=False)
class ProductivityTensor:
    """Revenue per employee ``values[i, a, t]``; NaN where undefined.

    ``defined`` marks cells with a positive employee total.  Undefined cells
    are never zero-filled.
    """

    provinces: Registry
    industries: Registry
    first_year: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        ok = ~np.isnan(v)
        if (~np.isfinite(v[ok])).any() or (v[ok] < 0).any():
            raise InputError("defined productivity values must be finite and nonnegative")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def defined(self):
        return ~np.isnan(self.values)

    @property
    def years(self):
        return range(self.first_year, self.first_year + self.values.shape[2])

    def at(self, year):
        k = year - self.first_year
        if not 0 <= k < self.values.shape[2]:
            raise InputError(f"year {year} outside productivity range")
        return self.values[:, :, k]


@dataclass
class IngestDiagnostics:
    rejected_rows: list = field(default_factory=list)
    missing_employees: int = 0
    missing_revenue: int = 0
    outside_listing: int = 0

    def reject(self, where, reason):
        self.rejected_rows.append((where, reason))
        log.warning("rejected %s: %s", where, reason)

    def summary(self):
        return {
            "rejected_rows": len(self.rejected_rows),
            "missing_employees": self.missing_employees,
            "missing_revenue": self.missing_revenue,
            "observations_outside_listing": self.outside_listing,
        }


@dataclass(frozen=True, eq=False)
class FirmData:
    panel: PanelTensor
    productivity: ProductivityTensor
    diagnostics: IngestDiagnostics


def _alive(list_year, delist_year, t):
    # a firm delisted in year t contributes through t - 1
    return list_year <= t and (delist_year is None or delist_year > t)


def ingest_firms(path, provinces=None, industries=None, years=None):
    """Build the firm-count panel and the productivity panel from firm records.

    Rows naming an unknown province or industry are skipped and recorded in
    the diagnostics; inconsistent firm attributes or a delisting year before
    the listing year raise ``InputError``.  ``years`` is an optional inclusive
    ``(first, last)`` override of the panel range.
    """
    provinces = provinces if provinces is not None else default_provinces()
    _, rows = read_table(path, ("firm_id", "province", "sector", "subsector", "list_year"),
                         ("delist_year", "year", "revenue", "employees"))
    diag = IngestDiagnostics()
    firms = {}
    observations = {}
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        fid = row["firm_id"]
        if not fid:
            raise InputError(f"{where}: missing firm_id")
        if row["province"] not in provinces:
            diag.reject(where, f"unknown province {row['province']!r}")
            continue
        try:
            code = IndustryCode(row["sector"], row["subsector"])
        except InputError as exc:
            diag.reject(where, str(exc))
            continue
        if industries is not None and code.code not in industries:
            diag.reject(where, f"unknown industry {code.code!r}")
            continue
        list_year = parse_int(row["list_year"], "list_year", where)
        delist_year = parse_int(row.get("delist_year", ""), "delist_year", where, allow_empty=True)
        if delist_year is not None and delist_year < list_year:
            raise InputError(f"{where}: firm {fid} delisted in {delist_year} before listing in {list_year}")
        attrs = (provinces.index(row["province"]), code, list_year, delist_year)
        if firms.setdefault(fid, attrs) != attrs:
            raise InputError(f"{where}: firm {fid} has inconsistent province/industry/listing fields")
        year = parse_int(row.get("year", ""), "year", where, allow_empty=True)
        if year is None:
            continue
        if (fid, year) in observations:
            raise InputError(f"{where}: duplicate observation for firm {fid} in {year}")
        revenue = parse_float(row.get("revenue", ""), "revenue", where, allow_empty=True)
        employees = parse_float(row.get("employees", ""), "employees", where, allow_empty=True)
        if (revenue is not None and revenue < 0) or (employees is not None and employees < 0):
            raise InputError(f"{where}: revenue and employees must be nonnegative")
        observations[(fid, year)] = (revenue, employees)

    if industries is None:
        industries = industry_registry(a[1] for a in firms.values())
    if not firms:
        raise InputError(f"{path}: no usable firm records")

    if years is None:
        first = min(a[2] for a in firms.values())
        last_candidates = [y for (_, y) in observations]
        last_candidates += [a[2] for a in firms.values()]
        last_candidates += [a[3] - 1 for a in firms.values() if a[3] is not None]
        years = (first, max(last_candidates))
    first, last = years
    if last < first:
        raise InputError(f"empty year range {first}-{last}")
    n_years = last - first + 1

    counts = np.zeros((len(provinces), len(industries), n_years), dtype=np.int64)
    revenue_sum = np.zeros(counts.shape)
    employee_sum = np.zeros(counts.shape)
    for fid, (i, code, list_year, delist_year) in firms.items():
        a = industries.index(code.code)
        lo = max(list_year, first)
        hi = min(last + 1, delist_year if delist_year is not None else last + 1)
        if hi > lo:
            counts[i, a, lo - first:hi - first] += 1
    for (fid, year), (revenue, employees) in sorted(observations.items()):
        i, code, list_year, delist_year = firms[fid]
        if not (first <= year <= last) or not _alive(list_year, delist_year, year):
            diag.outside_listing += 1
            continue
        if employees is None:
            diag.missing_employees += 1
            continue
        if revenue is None:
            diag.missing_revenue += 1
            revenue = 0.0
        a = industries.index(code.code)
        revenue_sum[i, a, year - first] += revenue
        employee_sum[i, a, year - first] += employees
    if diag.missing_employees:
        log.warning("%d observations without employee counts excluded from productivity",
                    diag.missing_employees)
    if diag.missing_revenue:
        log.warning("%d observations without revenue counted with zero revenue", diag.missing_revenue)

    with np.errstate(invalid="ignore", divide="ignore"):
        prod = np.where(employee_sum > 0, revenue_sum / np.where(employee_sum > 0, employee_sum, 1), np.nan)
    panel = PanelTensor(provinces, industries, first, counts)
    productivity = ProductivityTensor(provinces, industries, first, prod)
    return FirmData(panel, productivity, diag)


def render_panel(panel):
    """Long-format text of a panel: one row per province, industry and year."""
    rows = []
    for i, p in enumerate(panel.provinces):
        for a, c in enumerate(panel.industries):
            for k, t in enumerate(panel.years):
                rows.append((p.abbreviation, c.code, t, int(panel.counts[i, a, k])))
    return render_rows(["province", "industry", "year", "count"], rows)


def render_productivity(prod):
    rows = []
    for i, p in enumerate(prod.provinces):
        for a, c in enumerate(prod.industries):
            for k, t in enumerate(prod.years):
                v = prod.values[i, a, k]
                rows.append((p.abbreviation, c.code, t, "" if np.isnan(v) else repr(float(v))))
    return render_rows(["province", "industry", "year", "productivity"], rows)


def _read_long(path, value_column, provinces, industries, parse):
    _, rows = read_table(path, ("province", "industry", "year", value_column))
    if not rows:
        raise InputError(f"{path}: no rows")
    years = [parse_int(r["year"], "year", f"{path}:{n}") for n, r in rows]
    first, last = min(years), max(years)
    shape = (len(provinces), len(industries), last - first + 1)
    seen = np.zeros(shape, dtype=bool)
    cells = []
    for (lineno, row), year in zip(rows, years):
        where = f"{path}:{lineno}"
        idx = (provinces.index(row["province"]), industries.index(row["industry"]), year - first)
        if seen[idx]:
            raise InputError(f"{where}: duplicate cell")
        seen[idx] = True
        cells.append((idx, parse(row[value_column], where)))
    if not seen.all():
        raise InputError(f"{path}: panel is not complete over provinces x industries x years")
    return first, shape, cells


def read_panel(path, provinces, industries):
    """Inverse of :func:`render_panel`."""
    first, shape, cells = _read_long(path, "count", provinces, industries,
                                     lambda s, w: parse_int(s, "count", w))
    counts = np.zeros(shape, dtype=np.int64)
    for idx, v in cells:
        counts[idx] = v
    return PanelTensor(provinces, industries, first, counts)


def read_productivity(path, provinces, industries):
    first, shape, cells = _read_long(path, "productivity", provinces, industries,
                                     lambda s, w: parse_float(s, "productivity", w, allow_empty=True))
    values = np.full(shape, np.nan)
    for idx, v in cells:
        if v is not None:
            values[idx] = v
    return ProductivityTensor(provinces, industries, first, values)


def render_registries(provinces, industries):
    prov = render_rows(["id", "name", "abbreviation"], [(p.id, p.name, p.abbreviation) for p in provinces])
    ind = render_rows(["sector", "subsector", "name"], [(c.sector, c.subsector, c.name) for c in industries])
    return prov, ind


# -- pairwise tables -------------------------------------------------------

def _pair_rows(path, columns, provinces):
    """Collect unordered pair rows; both orientations may appear only if equal."""
    _, rows = read_table(path, columns)
    pairs = {}
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        if row["i"] not in provinces or row["j"] not in provinces:
            raise InputError(f"{where}: unknown province in pair ({row['i']}, {row['j']})")
        i, j = provinces.index(row["i"]), provinces.index(row["j"])
        if i == j:
            raise InputError(f"{where}: self pair {row['i']}")
        key = (min(i, j), max(i, j))
        values = tuple(row[c] for c in columns[2:])
        if key in pairs:
            if pairs[key][1] != values:
                a, b = provinces[key[0]], provinces[key[1]]
                raise InputError(f"{where}: asymmetric values for pair ({a}, {b})")
            continue
        pairs[key] = (where, values)
    n = len(provinces)
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs:
                raise InputError(f"{path}: missing pair ({provinces[i]}, {provinces[j]})")
    return pairs


def _symmetric(n, dtype=float):
    return np.zeros((n, n), dtype=dtype)


@dataclass(frozen=True, eq=False)
class DistanceTable:
    """Pairwise province separations.  Diagonals are zero and never used."""

    provinces: Registry
    geo_km: np.ndarray
    driving_km: np.ndarray
    hops: np.ndarray
    transit_h: np.ndarray
    train_h: np.ndarray
    drive_h: np.ndarray

    def __post_init__(self):
        n = len(self.provinces)
        off = ~np.eye(n, dtype=bool)
        for name in ("geo_km", "driving_km", "hops", "transit_h", "train_h", "drive_h"):
            m = np.asarray(getattr(self, name))
            if m.shape != (n, n) or not np.array_equal(m, m.T):
                raise InputError(f"distance matrix {name} must be symmetric {n}x{n}")
            if (m[off] <= 0).any():
                raise InputError(f"distance matrix {name} must be positive off the diagonal")
            object.__setattr__(self, name, _readonly(m))
        h = self.hops[off]
        if n > 1 and ((h < 1) | (h > n - 1)).any():
            raise InputError(f"neighboring hops must lie in [1, {n - 1}]")

    def weights(self, kind):
        """Distance matrix used by a density weighting variant."""
        if kind in ("geo", "geographic"):
            return self.geo_km
        if kind in ("hops", "neighboring"):
            return self.hops.astype(float)
        if kind == "driving":
            return self.driving_km
        raise InputError(f"unknown distance kind {kind!r}")

    @property
    def adjacent(self):
        """Provinces sharing a border (one hop apart)."""
        return self.hops == 1


def ingest_distances(path, provinces):
    pairs = _pair_rows(path, DISTANCE_COLUMNS, provinces)
    n = len(provinces)
    mats = {c: _symmetric(n) for c in DISTANCE_COLUMNS[2:]}
    hops = _symmetric(n, np.int64)
    for (i, j), (where, values) in pairs.items():
        for col, text in zip(DISTANCE_COLUMNS[2:], values):
            if col == "b_hops":
                v = parse_int(text, col, where)
                if not 1 <= v <= n - 1:
                    raise InputError(f"{where}: b_hops {v} outside [1, {n - 1}]")
                hops[i, j] = hops[j, i] = v
            else:
                v = parse_float(text, col, where)
                if v <= 0:
                    raise InputError(f"{where}: {col} must be positive")
                mats[col][i, j] = mats[col][j, i] = v
    return DistanceTable(provinces, mats["d_km"], mats["v_km"], hops,
                         mats["t_transit_h"], mats["t_train_h"], mats["t_drive_h"])


def render_distances(dist):
    rows = []
    n = len(dist.provinces)
    for i in range(n):
        for j in range(i + 1, n):
            rows.append((dist.provinces[i].abbreviation, dist.provinces[j].abbreviation,
                         dist.geo_km[i, j], dist.driving_km[i, j], int(dist.hops[i, j]),
                         dist.transit_h[i, j], dist.train_h[i, j], dist.drive_h[i, j]))
    return render_rows(list(DISTANCE_COLUMNS), rows)


@dataclass(frozen=True, eq=False)
class MacroTable:
    """Province-year indicators; NaN where a province-year is not reported."""

    provinces: Registry
    first_year: int
    population: np.ndarray
    gdp_pc: np.ndarray
    urban_area: np.ndarray
    land_area: np.ndarray
    trade: np.ndarray

    @property
    def years(self):
        return range(self.first_year, self.first_year + self.population.shape[1])

    @property
    def urbanization(self):
        return self.urban_area / self.land_area

    def column(self, name, year):
        k = year - self.first_year
        if not 0 <= k < self.population.shape[1]:
            raise InputError(f"no macro data for {year}")
        values = getattr(self, name)[:, k] if name != "urbanization" else self.urbanization[:, k]
        if np.isnan(values).any():
            missing = [str(self.provinces[i]) for i in np.flatnonzero(np.isnan(values))]
            raise InputError(f"macro {name} missing in {year} for {', '.join(missing)}")
        return values


def ingest_macro(path, provinces):
    _, rows = read_table(path, MACRO_COLUMNS)
    if not rows:
        raise InputError(f"{path}: no rows")
    parsed = []
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        if row["province"] not in provinces:
            raise InputError(f"{where}: unknown province {row['province']!r}")
        vals = [parse_float(row[c], c, where) for c in MACRO_COLUMNS[2:]]
        if any(v < 0 for v in vals):
            raise InputError(f"{where}: macro values must be nonnegative")
        pop, gdp, urban, land, trade = vals
        if land <= 0 or urban > land:
            raise InputError(f"{where}: urban area {urban} exceeds land area {land}")
        parsed.append((where, provinces.index(row["province"]),
                       parse_int(row["year"], "year", where), vals))
    first = min(p[2] for p in parsed)
    last = max(p[2] for p in parsed)
    arrays = np.full((5, len(provinces), last - first + 1), np.nan)
    for where, i, year, vals in parsed:
        if not np.isnan(arrays[0, i, year - first]):
            raise InputError(f"{where}: duplicate province-year")
        arrays[:, i, year - first] = vals
    return MacroTable(provinces, first, *arrays)


def render_macro(macro):
    rows = []
    for i, p in enumerate(macro.provinces):
        for k, t in enumerate(macro.years):
            if np.isnan(macro.population[i, k]):
                continue
            rows.append((p.abbreviation, t, macro.population[i, k], macro.gdp_pc[i, k],
                         macro.urban_area[i, k], macro.land_area[i, k], macro.trade[i, k]))
    return render_rows(list(MACRO_COLUMNS), rows)


@dataclass(frozen=True, eq=False)
class RailTable:
    """High-speed rail connection year per province pair (0 = never)."""

    provinces: Registry
    connected_year: np.ndarray

    def connected(self, as_of):
        """Boolean pair matrix: connected in or before ``as_of``."""
        y = self.connected_year
        out = (y > 0) & (y <= as_of)
        np.fill_diagonal(out, False)
        return out


def ingest_rail(path, provinces):
    pairs = _pair_rows(path, RAIL_COLUMNS, provinces)
    years = _symmetric(len(provinces), np.int64)
    for (i, j), (where, (text,)) in pairs.items():
        v = parse_int(text, "connected_year", where, allow_empty=True)
        if v is not None and v <= 0:
            raise InputError(f"{where}: connected_year must be a positive year")
        years[i, j] = years[j, i] = v or 0
    return RailTable(provinces, _readonly(years))


def render_rail(rail):
    rows = []
    n = len(rail.provinces)
    for i in range(n):
        for j in range(i + 1, n):
            y = int(rail.connected_year[i, j])
            rows.append((rail.provinces[i].abbreviation, rail.provinces[j].abbreviation, y or ""))
    return render_rows(list(RAIL_COLUMNS), rows)


def input_paths(input_dir):
    """Conventional file names inside an input directory."""
    return {name: os.path.join(input_dir, f"{name}.csv")
            for name in ("firms", "distances", "macro", "rail", "provinces", "industries")}
