"""Stage wiring for the command-line front end.

Each stage reads its inputs through a :class:`Run`, which caches intermediate
results, and emits text outputs into ``run.outputs``.  Nothing touches the
output directory until :meth:`Run.commit`, so a failing stage leaves no
partial files behind.
"""

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .complexity import activity, density_related, diversity_counts, proximity, rca, related_variants
from .errors import InputError
from .events import (ENTRY, KEEP, anova_two_group, binned_curve, detect_events, joint_grid,
                     pearson_r)
from .geo import (WEIGHTINGS, density_neighbors, density_neighbors_adjacent, pair_productivity,
                  productivity_density, similarity_matrix)
from .panel import (IndustryCode, default_provinces, industry_registry, ingest_distances,
                    ingest_firms, ingest_macro, ingest_rail, input_paths, read_industries,
                    read_panel, read_productivity, read_provinces, render_panel,
                    render_productivity)
from .regression import (DID_TERM, did_estimate, did_group_means, event_study, make_design,
                         probit_fit, regression_table)
from .space import build_industry_space
from .tables import DIGITS, fmt, parse_float, parse_int, parse_table, read_table, render_matrix, render_rows

log = logging.getLogger(__name__)

STAGES = ("ingest", "rca", "proximity", "space", "density", "events", "curves", "probit",
          "event-study", "did")
COMMANDS = STAGES + ("synth", "all")

EVENT_COLUMNS = ("province", "industry", "base_year", "kind", "outcome",
                 "related_density", "neighbor_density", "active_provinces", "active_industries",
                 "neighbor_ratio", "neighbor_active", "neighbor_total",
                 "related_ratio", "related_active", "related_total")

LABELS = {
    "neighbor_density": "neighbor density",
    "related_density": "related density",
    "neighbor_x_related": "neighbor density x related density",
    "neighbor_ratio": "neighbor ratio",
    "related_ratio": "related ratio",
    "ratio_product": "neighbor ratio x related ratio",
    "neighbor_active": "active neighbors",
    "related_active": "active related industries",
    "active_product": "active neighbors x active related",
    "neighbor_total": "neighbors",
    "related_total": "related industries",
    "total_product": "neighbors x related industries",
    "active_provinces": "active provinces in industry",
    "active_industries": "active industries in province",
    DID_TERM: "rail entry (treat x after)",
    "treat": "treatment group",
    "after": "after entry",
    "log_distance": "distance (log)",
    "gap_log_population": "gap in population (log)",
    "gap_log_gdp_pc": "gap in GDP per capita (log)",
    "gap_urbanization": "gap in urbanization",
    "gap_log_trade": "gap in trade (log)",
}


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str = "input"
    out_dir: str = "output"
    # cross-section year for rca, proximity and density exports; None = last panel year
    year: int = None
    horizon: int = 5
    base_years: tuple = None
    # "fixed" (last panel year), "fixed:<year>" or "varying"
    proximity: str = "fixed"
    density: str = "geo"
    bins: int = 10
    grid_bins: int = 5
    min_count: int = 5
    did_years: tuple = (2004, 2014)
    # rail connections counted as of this year; None = the second DID year
    treatment_year: int = None
    baseline_year: int = 2005
    threshold: float = 0.81
    strict_keep: bool = False
    entry_candidates: str = "backward"
    covariance: str = "robust"
    reference_year: int = None
    seed: int = None
    figures: bool = False

    def validate(self):
        if self.horizon < 1:
            raise InputError("horizon must be positive")
        if self.density not in WEIGHTINGS:
            raise InputError(f"density must be one of {', '.join(WEIGHTINGS)}")
        parse_proximity(self.proximity)
        if self.bins < 1 or self.grid_bins < 1:
            raise InputError("bin counts must be positive")
        if len(self.did_years) != 2 or self.did_years[0] >= self.did_years[1]:
            raise InputError("did_years needs two increasing years")
        if self.covariance not in ("robust", "classical"):
            raise InputError("covariance must be robust or classical")
        if self.entry_candidates not in ("backward", "inactive"):
            raise InputError("entry_candidates must be backward or inactive")
        if not 0 < self.threshold <= 1:
            raise InputError("threshold must lie in (0, 1]")
        return self

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise InputError(f"unknown config fields: {', '.join(sorted(extra))}")
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**fixed)


def parse_proximity(mode_text):
    """``("fixed", year-or-None)`` or ``("varying", None)``."""
    mode_text = str(mode_text)
    if mode_text == "varying":
        return "varying", None
    if mode_text == "fixed":
        return "fixed", None
    if mode_text.startswith("fixed:"):
        try:
            return "fixed", int(mode_text[6:])
        except ValueError:
            pass
    raise InputError(f"proximity must be fixed, fixed:<year> or varying, not {mode_text!r}")


# -- helpers -------------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _rounded(obj):
    """JSON-ready copy with floats cut to the table precision."""
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{DIGITS}g}")
    return obj


def dump_json(obj):
    return json.dumps(_rounded(obj), indent=2, sort_keys=True) + "\n"


def _probit_summary(res):
    out = res.to_dict()
    out["coefficients"] = {k: v for k, v in out["coefficients"].items() if not k.startswith("year_")}
    out["year_effects"] = sum(1 for k in res.names if k.startswith("year_"))
    return out


# -- run state -------------------------------------------------------------------

class Run:
    """Inputs, cached intermediates and pending outputs of one invocation."""

    def __init__(self, config, command, fresh=False):
        self.config = config.validate()
        self.command = command
        # ``fresh`` ignores stage artifacts in the input directory
        self.fresh = fresh
        self.paths = input_paths(config.input_dir)
        self.inputs = {}
        self.outputs = {}
        self.figures = {}
        self.resolved = {}
        self._cache = {}

    # inputs
    def _use(self, path):
        name = os.path.relpath(path, self.config.input_dir)
        if name not in self.inputs:
            self.inputs[name] = sha256_file(path)
        return path

    def _artifact(self, name):
        path = os.path.join(self.config.input_dir, name)
        return None if self.fresh or not os.path.isfile(path) else path

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def provinces(self):
        def build():
            path = self.paths["provinces"]
            return read_provinces(self._use(path)) if os.path.isfile(path) else default_provinces()
        return self._cached("provinces", build)

    @property
    def industries(self):
        """Registry from industries.csv, else None (derived from the data)."""
        def build():
            path = self.paths["industries"]
            return read_industries(self._use(path)) if os.path.isfile(path) else None
        return self._cached("industries", build)

    def _industries_from(self, path):
        _, rows = read_table(path, ("industry",))
        return industry_registry(sorted({IndustryCode.parse(r["industry"]) for _, r in rows},
                                        key=lambda c: c.code))

    def _firm_data(self):
        def build():
            path = self.paths["firms"]
            if not os.path.isfile(path):
                raise InputError(f"input file not found: {path}")
            return ingest_firms(self._use(path), self.provinces, self.industries)
        return self._cached("firms", build)

    @property
    def panel(self):
        def build():
            path = self._artifact("panel_counts.csv")
            if path is None:
                return self._firm_data().panel
            industries = self.industries or self._industries_from(path)
            return read_panel(self._use(path), self.provinces, industries)
        return self._cached("panel", build)

    @property
    def productivity(self):
        def build():
            path = self._artifact("panel_productivity.csv")
            if path is None:
                return self._firm_data().productivity
            return read_productivity(self._use(path), self.provinces, self.panel.industries)
        return self._cached("productivity", build)

    def _table(self, key, ingest):
        def build():
            path = self.paths[key]
            if not os.path.isfile(path):
                raise InputError(f"input file not found: {path}")
            return ingest(self._use(path), self.provinces)
        return self._cached(key, build)

    @property
    def distances(self):
        return self._table("distances", ingest_distances)

    @property
    def macro(self):
        return self._table("macro", ingest_macro)

    @property
    def rail(self):
        return self._table("rail", ingest_rail)

    # resolved settings
    @property
    def year(self):
        def build():
            y = self.config.year if self.config.year is not None else self.panel.last_year
            self.panel.year_index(y)
            self.resolved["year"] = y
            return y
        return self._cached("year", build)

    @property
    def proximity_year(self):
        """Year of the fixed proximity matrix, or None when it varies."""
        def build():
            mode, y = parse_proximity(self.config.proximity)
            if mode == "varying":
                self.resolved["proximity"] = "varying"
                return None
            y = self.panel.last_year if y is None else y
            self.panel.year_index(y)
            self.resolved["proximity"] = f"fixed:{y}"
            return y
        return self._cached("proximity_year", build)

    @property
    def treatment_year(self):
        y = self.config.treatment_year
        y = self.config.did_years[1] if y is None else y
        self.resolved["treatment_year"] = y
        return y

    # intermediates
    def counts(self, year):
        return self.panel.at(year)

    def rca(self, year):
        return self._cached(("rca", year), lambda: rca(self.counts(year)))

    def activity(self, year):
        return self._cached(("activity", year), lambda: activity(self.rca(year)))

    def proximity(self, year):
        """Proximity used for base year ``year`` under the configured mode."""
        fixed = self.proximity_year
        y = fixed if fixed is not None else year
        return self._cached(("proximity", y), lambda: proximity(self.counts(y)))

    def space(self, year):
        fixed = self.proximity_year
        y = fixed if fixed is not None else year

        def build():
            sizes = self.counts(y).sum(axis=0)
            return build_industry_space(self.proximity(y), list(self.panel.industries), sizes,
                                        self.config.threshold)
        return self._cached(("space", y), build)

    def densities(self, year):
        def build():
            u = self.activity(year)
            n_ind_active, n_prov_active = diversity_counts(u)
            nb_ratio, nb_active, nb_total = density_neighbors_adjacent(u, self.distances.adjacent)
            rel_ratio, rel_active, rel_total = related_variants(u, self.space(year).adjacency())
            shape = u.shape
            return {
                "related_density": density_related(u, self.proximity(year)),
                "neighbor_density": density_neighbors(u, self.distances, self.config.density),
                "active_provinces": np.broadcast_to(n_ind_active[None, :], shape),
                "active_industries": np.broadcast_to(n_prov_active[:, None], shape),
                "neighbor_ratio": nb_ratio,
                "neighbor_active": nb_active,
                "neighbor_total": nb_total,
                "related_ratio": rel_ratio,
                "related_active": rel_active,
                "related_total": rel_total,
            }
        return self._cached(("densities", year), build)

    def event_table(self):
        """Candidate cells with their regressors, as a dict of columns."""
        def build():
            path = self._artifact("events.csv")
            if path is not None:
                return read_event_table(self._use(path))
            # go through the written form so staged and one-shot runs agree
            return parse_event_table(render_event_table(self._build_event_table()))
        return self._cached("event_table", build)

    def _build_event_table(self):
        panel = self.panel
        u = np.stack([self.activity(t) for t in panel.years], axis=2)
        ev = detect_events(u, panel.first_year, self.config.horizon, self.config.base_years,
                           self.config.strict_keep, self.config.entry_candidates)
        self._cache["event_diagnostics"] = ev.diagnostics
        table = {
            "province": np.array([panel.provinces[i].abbreviation for i in ev.province], dtype=object),
            "industry": np.array([panel.industries[a].code for a in ev.industry], dtype=object),
            "base_year": ev.base_year,
            "kind": ev.kind.astype(object),
            "outcome": ev.outcome.astype(np.int64),
        }
        for name in EVENT_COLUMNS[5:]:
            table[name] = np.empty(len(ev), dtype=float)
        for t in ev.base_years:
            rows = np.flatnonzero(ev.base_year == t)
            dens = self.densities(t)
            for name in EVENT_COLUMNS[5:]:
                table[name][rows] = dens[name][ev.province[rows], ev.industry[rows]]
        return table

    # outputs
    def emit(self, name, text):
        if name in self.outputs and self.outputs[name] != text:
            raise RuntimeError(f"output {name} emitted twice with different content")
        self.outputs[name] = text

    def figure(self, name, draw, *args):
        if self.config.figures:
            self.figures[name] = (draw, args)

    def manifest(self):
        return {
            "command": self.command,
            "version": __version__,
            "config": self.config.to_dict(),
            "resolved": dict(sorted(self.resolved.items())),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {k: sha256_text(v) for k, v in sorted(self.outputs.items())},
            "figures": sorted(f"figures/{k}.png" for k in self.figures),
        }

    def render_figures(self):
        """PNG bytes per figure name; matplotlib is imported only here."""
        if not self.figures:
            return {}
        from .plotting import render
        return {f"figures/{k}.png": render(draw, *args) for k, (draw, args) in sorted(self.figures.items())}

    def commit(self):
        """Write every pending output plus the manifest; returns the file names."""
        pngs = self.render_figures()
        name = f"manifest_{self.command.replace('-', '_')}.json"
        files = dict(self.outputs)
        files[name] = dump_json(self.manifest())
        out = self.config.out_dir
        os.makedirs(out, exist_ok=True)
        for fname, text in sorted(files.items()):
            _atomic_write(os.path.join(out, fname), text.encode("utf-8"))
        for fname, data in sorted(pngs.items()):
            _atomic_write(os.path.join(out, fname), data)
        return sorted(files) + sorted(pngs)


def _atomic_write(path, data):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def render_event_table(table):
    n = len(table["outcome"])
    cols = [table[c] for c in EVENT_COLUMNS]
    return render_rows(EVENT_COLUMNS, (tuple(c[k] for c in cols) for k in range(n)))


def read_event_table(path):
    return _event_columns(read_table(path, EVENT_COLUMNS)[1], path)


def parse_event_table(text):
    """Inverse of :func:`render_event_table`."""
    return _event_columns(parse_table(text, EVENT_COLUMNS, source="events.csv")[1], "events.csv")


def _event_columns(rows, path):
    table = {c: [] for c in EVENT_COLUMNS}
    for lineno, row in rows:
        where = f"{path}:{lineno}"
        if row["kind"] not in (ENTRY, KEEP):
            raise InputError(f"{where}: kind must be {ENTRY} or {KEEP}")
        table["province"].append(row["province"])
        table["industry"].append(row["industry"])
        table["kind"].append(row["kind"])
        table["base_year"].append(parse_int(row["base_year"], "base_year", where))
        table["outcome"].append(parse_int(row["outcome"], "outcome", where))
        for c in EVENT_COLUMNS[5:]:
            v = parse_float(row[c], c, where, allow_empty=True)
            table[c].append(math.nan if v is None else v)
    out = {c: np.array(v, dtype=object) for c, v in table.items() if c in ("province", "industry", "kind")}
    out["base_year"] = np.array(table["base_year"], dtype=np.int64)
    out["outcome"] = np.array(table["outcome"], dtype=np.int64)
    for c in EVENT_COLUMNS[5:]:
        out[c] = np.array(table[c], dtype=float)
    return out


# -- stages ----------------------------------------------------------------------

def stage_ingest(run):
    fd = run._firm_data()
    run.emit("panel_counts.csv", render_panel(fd.panel))
    run.emit("panel_productivity.csv", render_productivity(fd.productivity))
    diag = fd.diagnostics.summary()
    diag["rejected"] = [{"where": w, "reason": r} for w, r in fd.diagnostics.rejected_rows]
    diag["years"] = [fd.panel.first_year, fd.panel.last_year]
    diag["provinces"] = len(fd.panel.provinces)
    diag["industries"] = len(fd.panel.industries)
    diag["firm_years"] = int(fd.panel.counts.sum())
    run.emit("ingest_diagnostics.json", dump_json(diag))


def _province_labels(run):
    return [p.abbreviation for p in run.panel.provinces]


def _industry_labels(run):
    return [c.code for c in run.panel.industries]


def stage_rca(run):
    y = run.year
    run.emit(f"rca_{y}.csv", render_matrix(_province_labels(run), _industry_labels(run), run.rca(y),
                                           "province"))
    run.emit(f"activity_{y}.csv", render_matrix(_province_labels(run), _industry_labels(run),
                                                run.activity(y), "province"))


def stage_proximity(run):
    y = run.proximity_year if run.proximity_year is not None else run.year
    labels = _industry_labels(run)
    run.emit(f"proximity_{y}.csv", render_matrix(labels, labels, run.proximity(y), "industry"))


def stage_space(run):
    from .plotting import draw_space
    y = run.proximity_year if run.proximity_year is not None else run.year
    graph = run.space(y)
    run.emit("space_edges.csv", graph.edge_table())
    run.emit("space.graphml", graph.graphml())
    origins = [e[3] for e in graph.edges]
    run.emit("space_summary.json", dump_json({
        "year": y,
        "threshold": run.config.threshold,
        "nodes": graph.n_nodes,
        "edges": len(graph.edges),
        "edges_by_origin": {o: origins.count(o) for o in sorted(set(origins))},
        "connected": graph.is_connected(),
    }))
    run.figure("industry_space", draw_space, graph)


def stage_density(run):
    from .plotting import draw_similarity_distance
    y = run.year
    dens = run.densities(y)
    prod = run.productivity.at(y)
    prod_density = productivity_density(prod, run.distances.geo_km)
    rca_y, u = run.rca(y), run.activity(y)
    rows = []
    for i, p in enumerate(_province_labels(run)):
        for a, c in enumerate(_industry_labels(run)):
            rows.append((p, c, rca_y[i, a], int(u[i, a]), dens["related_density"][i, a],
                         dens["neighbor_density"][i, a], prod[i, a], prod_density[i, a]))
    run.emit(f"density_{y}.csv", render_rows(
        ["province", "industry", "rca", "active", "related_density", "neighbor_density",
         "productivity", "productivity_density"], rows))

    # province-pair similarity against adjacency and distance
    sim = similarity_matrix(rca_y)
    labels = _province_labels(run)
    run.emit(f"similarity_{y}.csv", render_matrix(labels, labels, sim, "province"))
    iu = np.triu_indices(len(labels), 1)
    s = sim[iu]
    d = run.distances.geo_km[iu]
    adj = run.distances.adjacent[iu]
    stats = {"year": y, "pairs": int(s.size)}
    if adj.sum() >= 2 and (~adj).sum() >= 2:
        stats["adjacent_vs_other"] = dict(anova_two_group(s[adj], s[~adj]),
                                          mean_adjacent=float(s[adj].mean()),
                                          mean_other=float(s[~adj].mean()),
                                          n_adjacent=int(adj.sum()), n_other=int((~adj).sum()))
    stats["pearson_distance"] = pearson_r(d, s)
    curve = binned_curve(d, s, run.config.bins, run.config.min_count)
    run.emit("similarity_stats.json", dump_json(stats))
    run.emit("curve_similarity_distance.csv", render_rows(curve.header, curve.rows()))
    run.figure("similarity_distance", draw_similarity_distance, d, s, curve, stats["pearson_distance"])


def stage_events(run):
    table = run.event_table()
    run.emit("events.csv", render_event_table(table))
    diag = run._cache.get("event_diagnostics")
    if diag is None:
        kind, out = table["kind"], table["outcome"]
        diag = {"entry_candidates": int((kind == ENTRY).sum()),
                "entries": int(out[kind == ENTRY].sum()),
                "keep_candidates": int((kind == KEEP).sum()),
                "keeps": int(out[kind == KEEP].sum())}
    diag = dict(diag, horizon=run.config.horizon,
                base_years=sorted(set(int(t) for t in table["base_year"])))
    run.emit("events_summary.json", dump_json(diag))


def _subset(table, kind, columns):
    """Rows of one kind with every listed column defined; also the drop count."""
    rows = table["kind"] == kind
    ok = rows.copy()
    for c in columns:
        ok &= ~np.isnan(table[c])
    return np.flatnonzero(ok), int(rows.sum() - ok.sum())


def stage_curves(run):
    from .plotting import draw_curves, draw_joint_grid
    table = run.event_table()
    idx, dropped = _subset(table, ENTRY, ("related_density", "neighbor_density"))
    if idx.size == 0:
        raise InputError("no entry candidates with defined densities")
    y = table["outcome"][idx]
    rel = table["related_density"][idx]
    nb = table["neighbor_density"][idx]
    cfg = run.config
    curves = {}
    for name, x in (("related", rel), ("neighbor", nb)):
        c = binned_curve(x, y, cfg.bins, cfg.min_count)
        curves[name] = c
        run.emit(f"curve_{name}.csv", render_rows(c.header, c.rows()))
    grid = joint_grid(nb, rel, y, cfg.grid_bins)
    run.emit("joint_grid.csv", render_rows(("neighbor_lower", "neighbor_upper", "related_lower",
                                            "related_upper", "count", "mean"), grid.rows()))
    stats = {"candidates": int(idx.size), "dropped_undefined": dropped,
             "entries": int(y.sum())}
    for name, x in (("related", rel), ("neighbor", nb)):
        hit = y == 1
        if hit.sum() >= 2 and (~hit).sum() >= 2:
            stats[f"{name}_entered_vs_not"] = dict(anova_two_group(x[hit], x[~hit]),
                                                   mean_entered=float(x[hit].mean()),
                                                   mean_not=float(x[~hit].mean()))
    run.emit("entry_stats.json", dump_json(stats))
    run.figure("curves", draw_curves, curves)
    run.figure("joint_grid", draw_joint_grid, grid)


def _probit_columns(table, kind, models, cfg):
    """Fit one probit per regressor list on a common sample of ``kind`` rows."""
    needed = sorted({c for model in models for c in _model_columns(model)})
    idx, dropped = _subset(table, kind, needed)
    results = []
    for model in models:
        regs = {}
        for c in model:
            if c == "neighbor_x_related":
                regs[c] = table["neighbor_density"][idx] * table["related_density"][idx]
            elif c == "ratio_product":
                regs[c] = table["neighbor_ratio"][idx] * table["related_ratio"][idx]
            elif c == "active_product":
                regs[c] = table["neighbor_active"][idx] * table["related_active"][idx]
            elif c == "total_product":
                regs[c] = table["neighbor_total"][idx] * table["related_total"][idx]
            else:
                regs[c] = table[c][idx]
        design = make_design(table["outcome"][idx], regs, years=table["base_year"][idx],
                             reference_year=cfg.reference_year)
        results.append(probit_fit(design))
    return results, dropped


def _model_columns(model):
    base = {"neighbor_x_related": ("neighbor_density", "related_density"),
            "ratio_product": ("neighbor_ratio", "related_ratio"),
            "active_product": ("neighbor_active", "related_active"),
            "total_product": ("neighbor_total", "related_total")}
    out = []
    for c in model:
        out += base.get(c, (c,))
    return out


def stage_probit(run):
    table = run.event_table()
    cfg = run.config
    related = [("related_density",), ("related_density", "active_provinces"),
               ("related_density", "active_provinces", "active_industries")]
    neighbor = [("neighbor_density",), ("neighbor_density", "active_industries"),
                ("neighbor_density", "active_industries", "active_provinces")]
    joint = [("neighbor_density", "related_density"),
             ("neighbor_density", "related_density", "neighbor_x_related"),
             ("neighbor_ratio", "related_ratio"),
             ("neighbor_ratio", "related_ratio", "ratio_product"),
             ("neighbor_active", "related_active", "active_product"),
             ("neighbor_total", "related_total", "total_product")]
    summary = {}
    for name, models, kinds in (("related", related, (ENTRY, KEEP)),
                               ("neighbor", neighbor, (ENTRY, KEEP)),
                               ("joint", joint, (ENTRY,))):
        results, titles, meta = [], [], {}
        for kind in kinds:
            fitted, dropped = _probit_columns(table, kind, models, cfg)
            results += fitted
            titles += [f"{kind} ({len(titles) + k + 1})" for k in range(len(fitted))]
            meta[kind] = {"dropped_undefined": dropped}
        labels = {k: v for k, v in LABELS.items() if any(k in r.names for r in results)}
        run.emit(f"probit_{name}.csv", regression_table(results, labels, titles))
        summary[name] = {"samples": meta,
                         "columns": {t: _probit_summary(r) for t, r in zip(titles, results)}}
    run.emit("probit.json", dump_json(summary))


def _pair_index(n):
    return np.triu_indices(n, 1)


def _similarity_by_year(run, years):
    iu = _pair_index(len(run.panel.provinces))
    return np.column_stack([similarity_matrix(run.rca(t))[iu] for t in years])


def _pair_productivity_by_year(run, years):
    iu = _pair_index(len(run.panel.provinces))
    return np.column_stack([pair_productivity(run.productivity.at(t))[iu] for t in years])


def _treatment(run):
    iu = _pair_index(len(run.panel.provinces))
    return run.rail.connected(run.treatment_year)[iu]


def stage_event_study(run):
    from .plotting import draw_event_study
    years = list(run.panel.years)
    if run.config.baseline_year not in years:
        raise InputError(f"baseline year {run.config.baseline_year} outside the panel")
    treat = _treatment(run)
    summary = {"baseline_year": run.config.baseline_year, "treatment_year": run.treatment_year,
               "treated_pairs": int(treat.sum()), "control_pairs": int((~treat).sum())}
    studies = {}
    group_rows = []
    outcomes = {"similarity": _similarity_by_year(run, years),
                "productivity": _pair_productivity_by_year(run, years)}
    for name, y in outcomes.items():
        es = event_study(y, years, treat, run.config.baseline_year, run.config.covariance)
        studies[name] = es
        run.emit(f"event_study_{name}.csv", render_rows(es.header, es.rows()))
        summary[name] = {"n": es.regression.n, "r2": es.regression.r2, "pretrend": es.pretrend}
    for k, t in enumerate(years):
        row = [t]
        for y in outcomes.values():
            col = y[:, k]
            for grp in (treat, ~treat):
                v = col[grp & ~np.isnan(col)]
                row.append(float(v.mean()) if v.size else math.nan)
        group_rows.append(row)
    run.emit("event_study_groups.csv", render_rows(
        ["year", "similarity_treated", "similarity_control", "productivity_treated",
         "productivity_control"], group_rows))
    run.emit("event_study.json", dump_json(summary))
    run.figure("event_study", draw_event_study, studies["similarity"], group_rows)


def _gap_controls(run, year):
    iu = _pair_index(len(run.panel.provinces))
    m = run.macro

    def gap(values, log_scale):
        v = np.asarray(values, dtype=float)
        if log_scale:
            if (v <= 0).any():
                raise InputError(f"log control needs positive values in {year}")
            v = np.log(v)
        return np.abs(v[:, None] - v[None, :])[iu]

    return {
        "gap_log_population": gap(m.column("population", year), True),
        "gap_log_gdp_pc": gap(m.column("gdp_pc", year), True),
        "gap_urbanization": gap(m.column("urbanization", year), False),
        "gap_log_trade": gap(m.column("trade", year), True),
    }


def stage_did(run):
    from .plotting import draw_did
    before, after = run.config.did_years
    for t in (before, after):
        run.panel.year_index(t)
    treat = _treatment(run)
    iu = _pair_index(len(run.panel.provinces))
    log_dist = np.log(run.distances.geo_km[iu])
    outcomes = {"similarity": _similarity_by_year(run, [before, after]),
                "productivity": _pair_productivity_by_year(run, [before, after])}
    c0, c1 = _gap_controls(run, before), _gap_controls(run, after)
    control_sets = [(), ("gap_log_population", "gap_log_gdp_pc"), ("gap_urbanization", "gap_log_trade")]
    summary = {"years": [before, after], "treatment_year": run.treatment_year,
               "treated_pairs": int(treat.sum()), "control_pairs": int((~treat).sum())}
    for suffix, with_distance in (("", False), ("_distance", True)):
        results, titles = [], []
        for name, y in outcomes.items():
            for k, names in enumerate(control_sets):
                cb = {n: c0[n] for n in names}
                ca = {n: c1[n] for n in names}
                if with_distance:
                    cb = {"log_distance": log_dist, **cb}
                    ca = {"log_distance": log_dist, **ca}
                res = did_estimate(y[:, 0], y[:, 1], treat, cb, ca, run.config.covariance)
                results.append(res)
                titles.append(f"{name} ({len(titles) + 1})")
        labels = {k: v for k, v in LABELS.items() if any(k in r.names for r in results)}
        run.emit(f"did_table{suffix}.csv", regression_table(results, labels, titles))
        summary[f"columns{suffix}"] = {t: r.to_dict() for t, r in zip(titles, results)}
    means = {name: did_group_means(y[:, 0], y[:, 1], treat) for name, y in outcomes.items()}
    summary["group_means"] = means
    run.emit("did.json", dump_json(summary))
    run.figure("did", draw_did, means, (before, after))


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "rca": stage_rca,
    "proximity": stage_proximity,
    "space": stage_space,
    "density": stage_density,
    "events": stage_events,
    "curves": stage_curves,
    "probit": stage_probit,
    "event-study": stage_event_study,
    "did": stage_did,
}


def run_stages(config, command):
    """Run one stage (or every stage for ``all``) and return the pending run."""
    if command == "all":
        run = Run(config, command, fresh=True)
        for name in STAGES:
            log.info("stage %s", name)
            STAGE_FUNCS[name](run)
        return run
    if command not in STAGE_FUNCS:
        raise InputError(f"unknown stage {command!r}")
    run = Run(config, command)
    STAGE_FUNCS[command](run)
    return run


def run_synth(out_dir, seed=None, overrides=None):
    """Generate a scenario and return ``(files, manifest)`` without writing."""
    from .synth import ScenarioConfig, generate
    data = dict(overrides or {})
    if seed is not None:
        data["seed"] = seed
    cfg = ScenarioConfig.from_dict(data)
    scenario = generate(cfg)
    files = scenario.files()
    manifest = {
        "command": "synth",
        "version": __version__,
        "config": {"out_dir": out_dir, "scenario": dataclasses.asdict(cfg)},
        "outputs": {k: sha256_text(v) for k, v in sorted(files.items())},
    }
    return files, manifest
