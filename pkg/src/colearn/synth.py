"""Seeded synthetic firm panels with a known entry mechanism.

Provinces sit on a jittered grid.  Each year every inactive province-industry
cell activates with a hazard chosen so that the chance of activating within
``horizon`` years, at fixed densities, is the normal CDF of a linear link in
the neighbour density, the related density and their product.  Firm listings
are then adjusted so that the RCA of the firm counts reproduces the intended
activity pattern, which makes the pipeline's observed activity match it.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import complexity
from .errors import InputError
from .panel import (FIRM_COLUMNS, DistanceTable, IndustryCode, MacroTable, Province, RailTable,
                    default_provinces, industry_registry, province_registry, render_distances,
                    render_macro, render_rail)
from .special import normal_cdf
from .tables import fmt, render_rows

log = logging.getLogger(__name__)

SECTOR_LETTERS = "ABCDEFGHIJKLMNOPQR"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 8
    provinces: int = 31
    grid: tuple = (5, 7)
    cell_km: float = 320.0
    industries: int = 70
    sectors: int = 18
    first_year: int = 1990
    last_year: int = 2015
    burn_in: int = 60
    horizon: int = 5
    # link coefficients: intercept, neighbour density, related density, product
    link: tuple = (-3.0, 4.0, 4.5, -3.0)
    exit_rate: float = 0.25
    # a year-specific intercept shift, -gain * (share - target), holds overall
    # activity near the target; a gain of 0 disables it
    target_activity: float = 0.35
    activity_gain: float = 20.0
    initial_activity: float = 0.3
    firms_per_active_cell: float = 3.0
    firm_growth: float = 0.02
    rail_years: tuple = (2007, 2012)
    rail_similarity_effect: float = 0.5
    rail_productivity_effect: float = 0.15
    productivity_noise: float = 0.05

    def validate(self):
        rows, cols = self.grid
        if self.provinces < 2:
            raise InputError("a scenario needs at least two provinces")
        if rows * cols < self.provinces:
            raise InputError(f"grid {rows}x{cols} cannot hold {self.provinces} provinces")
        if self.industries < 2 or not 1 <= self.sectors <= min(len(SECTOR_LETTERS), self.industries):
            raise InputError("need at least two industries and between 1 and 18 sectors")
        if self.industries > 99:
            raise InputError("subsector codes are two digits: at most 99 industries")
        if self.last_year - self.first_year < 2 * self.horizon + 2:
            raise InputError("year range too short for the event window")
        if len(self.link) != 4:
            raise InputError("link needs four coefficients")
        if not 0 <= self.exit_rate <= 1 or not 0 < self.initial_activity < 1 \
                or not 0 < self.target_activity < 1 or self.activity_gain < 0:
            raise InputError("exit_rate and activity shares must be probabilities")
        lo, hi = self.rail_years
        if not self.first_year <= lo <= hi <= self.last_year:
            raise InputError("rail rollout years must lie inside the panel")

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise InputError(f"unknown scenario fields: {', '.join(sorted(extra))}")
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**data)


@dataclass
class Scenario:
    config: ScenarioConfig
    provinces: object
    industries: object
    distances: DistanceTable
    macro: MacroTable
    rail: RailTable
    firm_rows: list
    activity: np.ndarray
    counts: np.ndarray
    truth: dict = field(default_factory=dict)

    def files(self):
        """File name -> text for every generated table."""
        prov = render_rows(["id", "name", "abbreviation"],
                           [(p.id, p.name, p.abbreviation) for p in self.provinces])
        ind = render_rows(["sector", "subsector", "name"],
                          [(c.sector, c.subsector, c.name) for c in self.industries])
        return {
            "firms.csv": render_rows(list(FIRM_COLUMNS), self.firm_rows),
            "distances.csv": render_distances(self.distances),
            "macro.csv": render_macro(self.macro),
            "rail.csv": render_rail(self.rail),
            "provinces.csv": prov,
            "industries.csv": ind,
            "truth.json": json.dumps(self.truth, indent=2, sort_keys=True) + "\n",
        }


def _provinces(n):
    if n <= 31:
        return province_registry(list(default_provinces())[:n])
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return province_registry(Province(k + 1, f"Province {k + 1}", letters[k // 26 % 26] + letters[k % 26])
                             for k in range(n))


def _industries(cfg):
    codes = []
    for k in range(cfg.industries):
        sector = SECTOR_LETTERS[k * cfg.sectors // cfg.industries]
        codes.append(IndustryCode(sector, f"{k + 1:02d}", f"Industry {sector}{k + 1:02d}"))
    return industry_registry(codes)


def _geography(cfg, rng, provinces):
    rows, cols = cfg.grid
    slots = [(r, c) for r in range(rows) for c in range(cols)][:cfg.provinces]
    cell = np.array(slots, dtype=float)
    xy = (cell + rng.uniform(-0.25, 0.25, cell.shape)) * cfg.cell_km
    diff = xy[:, None, :] - xy[None, :, :]
    geo = np.round(np.sqrt((diff ** 2).sum(axis=2)), 1)
    hops = np.abs(cell[:, None, :] - cell[None, :, :]).max(axis=2).astype(np.int64)
    detour = rng.uniform(1.15, 1.45, geo.shape)
    detour = np.triu(detour, 1) + np.triu(detour, 1).T
    drive = np.round(geo * detour, 1)
    n = cfg.provinces
    eye = np.eye(n, dtype=bool)
    for m in (geo, drive):
        m[eye] = 0.0
    hops[eye] = 0
    dist = DistanceTable(provinces, geo, drive, hops, np.round(drive / 55.0, 2),
                         np.round(drive / 110.0, 2), np.round(drive / 80.0, 2))
    return dist, cell


def _rail(cfg, rng, provinces, hops):
    n = cfg.provinces
    lo, hi = cfg.rail_years
    year = np.zeros((n, n), dtype=np.int64)
    chance = {1: 0.45, 2: 0.3, 3: 0.15}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < chance.get(int(hops[i, j]), 0.06):
                year[i, j] = year[j, i] = int(rng.integers(lo, hi + 1))
    return RailTable(provinces, year)


def _macro(cfg, rng, provinces):
    n = cfg.provinces
    years = np.arange(cfg.first_year, cfg.last_year + 1)
    steps = years - cfg.first_year
    pop0 = rng.uniform(300, 9000, n)
    gdp0 = rng.uniform(1500, 9000, n)
    land = np.round(rng.uniform(2e4, 6e5, n))
    urban0 = rng.uniform(0.004, 0.04, n)
    trade0 = rng.uniform(5e4, 5e6, n)

    def walk(start, drift, vol):
        shocks = rng.normal(drift, vol, (n, len(years)))
        shocks[:, 0] = 0.0
        return start[:, None] * np.exp(np.cumsum(shocks, axis=1))

    pop = np.round(walk(pop0, 0.007, 0.004), 1)
    gdp = np.round(walk(gdp0, 0.09, 0.03))
    urban_share = np.minimum(urban0[:, None] * (1.0 + 0.04 * steps[None, :]), 0.9)
    urban = np.round(urban_share * land[:, None])
    trade = np.round(walk(trade0, 0.1, 0.08))
    land_full = np.repeat(land[:, None], len(years), axis=1)
    return MacroTable(provinces, cfg.first_year, pop, gdp, urban, land_full, trade)


def entry_hazard(link_value, horizon):
    """Per-year hazard giving probability ``normal_cdf(link)`` over ``horizon`` years."""
    p = np.clip(normal_cdf(link_value), 0.0, 1.0)
    return 1.0 - (1.0 - p) ** (1.0 / horizon)


def _repair(x, target, max_passes=60):
    """Move counts until ``RCA >= 1`` holds exactly on the target cells.

    For one cell with count ``v``, row remainder ``r``, column remainder
    ``c`` and the remaining total ``s``, RCA >= 1 iff ``v * s >= r * c``.
    Counts are pushed to the nearest side of that bound and the pass repeats
    because every change moves the other cells' bounds.
    """
    x = x.copy()
    for _ in range(max_passes):
        u = complexity.activity(complexity.rca(x)).astype(bool)
        wrong_on = target & ~u
        wrong_off = ~target & u
        if not (wrong_on.any() or wrong_off.any()):
            return x, 0
        row = x.sum(axis=1, keepdims=True)
        col = x.sum(axis=0, keepdims=True)
        total = x.sum()
        r = row - x
        c = col - x
        s = total - r - c - x
        s_safe = np.maximum(s, 1)
        need = -((-(r * c)) // s_safe) + 1
        cap = np.maximum((r * c - 1) // s_safe, 0)
        cap = np.where(r * c == 0, 0, cap)
        x = np.where(wrong_on, np.maximum(x, need), x)
        x = np.where(wrong_off, np.minimum(x, cap), x)
    u = complexity.activity(complexity.rca(x)).astype(bool)
    return x, int((u != target).sum())


class _FirmBook:
    """Listing and delisting of individual firms per cell."""

    def __init__(self, rng, cfg):
        self.rng = rng
        self.cfg = cfg
        self.alive = {}
        self.firms = []

    def adjust(self, i, a, year, wanted):
        cell = self.alive.setdefault((i, a), [])
        while len(cell) < wanted:
            employees = int(max(8, round(self.rng.lognormal(math.log(320.0), 0.7))))
            efficiency = float(self.rng.lognormal(0.0, 0.2))
            firm = {"id": len(self.firms) + 1, "i": i, "a": a, "list": year, "delist": None,
                    "employees": employees, "efficiency": efficiency}
            self.firms.append(firm)
            cell.append(firm)
        while len(cell) > wanted:
            cell.pop()["delist"] = year


def generate(config=None):
    """Run the scenario and return a :class:`Scenario` with all tables."""
    cfg = config or ScenarioConfig()
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    provinces = _provinces(cfg.provinces)
    industries = _industries(cfg)
    n, m = cfg.provinces, cfg.industries
    years = list(range(cfg.first_year, cfg.last_year + 1))
    dist, cell = _geography(cfg, rng, provinces)
    rail = _rail(cfg, rng, provinces, dist.hops)
    macro = _macro(cfg, rng, provinces)
    sector = np.array([SECTOR_LETTERS.index(c.sector) for c in industries])

    # sector hot spots make related industries co-locate and activity cluster in space
    centres = rng.uniform(0, 1, (cfg.sectors, 2)) * (np.array(cfg.grid) - 1)
    gap = np.sqrt(((cell[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2))
    affinity = np.exp(-gap / 1.5)[:, sector]
    odds = cfg.initial_activity * 2.0 * affinity / affinity.mean()
    active = rng.random((n, m)) < np.clip(odds, 0.02, 0.9)
    age = np.full((n, m), 100)

    size = rng.uniform(0.6, 1.6, n)
    popularity = rng.uniform(0.5, 2.0, m)
    level = cfg.firms_per_active_cell * size[:, None] * popularity[None, :]
    base_prod = rng.uniform(1.5e5, 6e5, m)[None, :] * rng.uniform(0.7, 1.4, n)[:, None]
    w_geo = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    w_geo[off] = 1.0 / dist.geo_km[off]
    b0, b1, b2, b3 = cfg.link
    min_stay = cfg.horizon + 2

    def densities(act, counts, year):
        omega_geo = (w_geo @ act) / w_geo.sum(axis=1)[:, None]
        related = complexity.density_related(act, complexity.proximity(counts))
        return omega_geo, np.nan_to_num(related)

    def rail_share(act, year):
        # share of a province's rail partners active in each industry
        link = rail.connected(year).astype(float)
        partners = np.maximum(link.sum(axis=1), 1.0)[:, None]
        return (link @ act) / partners

    shift = [0.0]

    def step(act, age, counts, year):
        geo_d, rel_d = densities(act.astype(float), counts, year)
        link = b0 + shift[0] + b1 * geo_d + b2 * rel_d + b3 * geo_d * rel_d
        p_in = entry_hazard(link, cfg.horizon)
        p_out = cfg.exit_rate * (1.0 - 0.5 * rel_d)
        draw = rng.random((n, m))
        enter = ~act & (draw < p_in)
        leave = act & (age >= min_stay) & (draw < p_out)
        nxt = (act | enter) & ~leave
        age = np.where(enter | leave, 0, age + 1)
        shift[0] = float(np.clip(-cfg.activity_gain * (nxt.mean() - cfg.target_activity), -3.0, 3.0))
        return nxt, age

    def counts_for(act, t):
        growth = (1.0 + cfg.firm_growth) ** (t - cfg.first_year)
        noise = rng.lognormal(0.0, 0.1, (n, m))
        # rail partners pull firm counts towards their own specialisation
        pull = 1.0 + cfg.rail_similarity_effect * rail_share(act.astype(float), t)
        on = np.maximum(1, np.round(level * growth * noise * pull)).astype(np.int64)
        off_counts = (rng.random((n, m)) < 0.3).astype(np.int64)
        return np.where(act, on, off_counts)

    unresolved = 0
    counts, bad = _repair(counts_for(active, cfg.first_year), active)
    active = complexity.activity(complexity.rca(counts)).astype(bool)
    for _ in range(cfg.burn_in):
        active, age = step(active, age, counts, cfg.first_year)
        counts, bad = _repair(counts_for(active, cfg.first_year), active)
        active = complexity.activity(complexity.rca(counts)).astype(bool)

    book = _FirmBook(rng, cfg)
    history = np.zeros((n, m, len(years)), dtype=bool)
    count_history = np.zeros((n, m, len(years)), dtype=np.int64)
    year_shift = {}
    for k, t in enumerate(years):
        year_shift[t] = shift[0]
        if k > 0:
            active, age = step(active, age, counts, t)
            target = counts_for(active, t)
            # existing cells keep their firms unless the target moves far
            keep = np.abs(target - counts) <= np.maximum(1, counts // 5)
            target = np.where(keep & (active == history[:, :, k - 1]), counts, target)
            counts, bad = _repair(target, active)
            unresolved += bad
            active = complexity.activity(complexity.rca(counts)).astype(bool)
        history[:, :, k] = active
        count_history[:, :, k] = counts
        for i in range(n):
            for a in range(m):
                book.adjust(i, a, t, int(counts[i, a]))

    firm_rows = _firm_rows(cfg, rng, book, provinces, industries, history, rail, base_prod)
    truth = {
        "config": _jsonable(asdict(cfg)),
        "link": {"const": b0, "neighbor_density": b1, "related_density": b2, "interaction": b3},
        "year_shift": {str(t): float(fmt(v)) for t, v in year_shift.items()},
        "rail_similarity_effect": cfg.rail_similarity_effect,
        "rail_productivity_effect": cfg.rail_productivity_effect,
        "realised": {
            "firms": len(book.firms),
            "firm_rows": len(firm_rows),
            "activity_share": float(fmt(history.mean())),
            "rail_pairs": int((np.triu(rail.connected_year, 1) > 0).sum()),
            "unresolved_cells": unresolved,
        },
    }
    return Scenario(cfg, provinces, industries, dist, macro, rail, firm_rows, history, count_history,
                    truth)


def _firm_rows(cfg, rng, book, provinces, industries, history, rail, base_prod):
    rows = []
    years = range(cfg.first_year, cfg.last_year + 1)
    # productivity multiplier from rail partners active in the same industry
    uplift = np.ones(history.shape)
    for k, t in enumerate(years):
        link = rail.connected(t).astype(float)
        partners = link.sum(axis=1)
        share = np.where(partners[:, None] > 0,
                         (link @ history[:, :, k]) / np.maximum(partners, 1)[:, None], 0.0)
        uplift[:, :, k] = 1.0 + cfg.rail_productivity_effect * share
    growth = 1.06 ** np.arange(len(years))
    for firm in book.firms:
        i, a = firm["i"], firm["a"]
        end = firm["delist"] if firm["delist"] is not None else cfg.last_year + 1
        for t in range(firm["list"], end):
            k = t - cfg.first_year
            noise = math.exp(cfg.productivity_noise * float(rng.standard_normal()))
            prod = base_prod[i, a] * growth[k] * uplift[i, a, k] * firm["efficiency"] * noise
            code = industries[a]
            rows.append((f"F{firm['id']:06d}", provinces[i].abbreviation, code.sector, code.subsector,
                         firm["list"], firm["delist"] if firm["delist"] is not None else "", t,
                         int(round(prod * firm["employees"])), firm["employees"]))
    return rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_scenario(scenario, out_dir):
    """Write every generated table into ``out_dir``; returns the file names."""
    os.makedirs(out_dir, exist_ok=True)
    files = scenario.files()
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return sorted(files)
