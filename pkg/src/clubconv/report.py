"""End-to-end pipeline: every analysis on one panel, written to one directory."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import platform
from dataclasses import asdict, dataclass, field
from importlib import metadata, resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .boxcluster import AnnealSchedule, Partition, consensus_cluster
from .errors import DegenerateError
from .factor import club_trend_analysis, differentials, fit_factor, residual_panel
from .hp import HpParams, hp_panel
from .logt import LogTParams, club_cluster, transition_paths
from .panel import Panel, require_positive
from .stats import CorrMatrix, decompose_market, eigen_sym, eigenportfolio, pearson_corr

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


def report_schema() -> dict:
    """The JSON schema that every ``report.json`` validates against."""
    text = resources.files(__package__).joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class PipelineConfig:
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    hp: HpParams = field(default_factory=HpParams)
    logt: LogTParams = field(default_factory=LogTParams)
    logt_hp: bool = True
    partial_hp: bool = False
    timestamp: str | None = None

    def to_json(self) -> dict:
        return {
            "seed": self.anneal.seed,
            "anneal": asdict(self.anneal),
            "hp_lambda": self.hp.lam,
            "logt_hp_filter": self.logt_hp,
            "partial_source": "hp_trend" if self.partial_hp else "raw",
            "r_fraction": self.logt.r,
            "critical_t": self.logt.critical_t,
            "sieve_c": self.logt.sieve_c,
            "se_mode": self.logt.se_mode,
        }


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def series_csv(periods: tuple[str, ...], columns: dict[str, np.ndarray]) -> str:
    """Tidy layout: a period column, then one column per named series."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(["period", *names])
    for t, period in enumerate(periods):
        writer.writerow([period, *(repr(float(columns[n][t])) for n in names)])
    return buf.getvalue()


class _Output:
    def __init__(self, out_dir: Path) -> None:
        self.dir = out_dir
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> str:
        data = text.encode("utf-8")
        (self.dir / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return name


def _cluster_block(out: _Output, prefix: str, c: CorrMatrix, schedule: AnnealSchedule) -> dict:
    affinity, part = consensus_cluster(c, schedule)
    return {
        "affinity": affinity.to_json(),
        "partition": part.to_json(),
        "files": [out.write(f"{prefix}_affinity.csv", affinity.to_csv())],
    }


def _stage(name: str, fn: Callable[[], dict]) -> dict:
    try:
        body = fn()
    except DegenerateError as exc:
        log.warning("%s stage degenerate: %s", name, exc)
        return {"status": "degenerate", "reason": str(exc)}
    return {"status": "ok", **body}


def run_pipeline(
    panel: Panel,
    config: PipelineConfig,
    out_dir: str | Path,
    *,
    input_name: str | None = None,
    input_sha256: str | None = None,
) -> dict:
    """Run every analysis on ``panel`` and write the report into ``out_dir``.

    Stages downstream of the raw correlation record ``degenerate`` instead of aborting when their inputs are numerically
    degenerate (identical series, exact factor fits). Failure of the raw
    correlation itself propagates.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = _Output(out_dir)
    sched = config.anneal
    require_positive(panel)

    raw = pearson_corr(panel)
    raw_eigen = eigen_sym(raw)
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "timestamp": config.timestamp
            or _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "input": {"name": input_name, "sha256": input_sha256},
            "config": config.to_json(),
            "versions": _versions(),
        },
        "panel": {
            "entities": list(panel.entities),
            "n": panel.n,
            "t": panel.t,
            "first_period": panel.periods[0],
            "last_period": panel.periods[-1],
        },
    }

    def raw_stage() -> dict:
        files = [out.write("raw_corr.csv", raw.to_csv()), out.write("raw_eigen.csv", raw_eigen.to_csv())]
        block = _cluster_block(out, "raw", raw, sched)
        block["files"] = files + block["files"]
        return {"corr": raw.to_json(), "eigen": raw_eigen.to_json(), **block}

    report["raw"] = _stage("raw", raw_stage)

    trend_panel = hp_panel(panel, config.hp)

    def trend_stage() -> dict:
        c = pearson_corr(trend_panel)
        block = _cluster_block(out, "trend", c, sched)
        block["files"].insert(0, out.write("trend_corr.csv", c.to_csv()))
        return {"hp_lambda": config.hp.lam, "corr": c.to_json(), **block}

    report["trend"] = _stage("trend", trend_stage)

    g = eigenportfolio(raw_eigen.v1, panel)
    out.write("collective_trend.csv", series_csv(panel.periods, {"G": g}))
    report["collective_trend"] = {
        "weights": dict(zip(panel.entities, (raw_eigen.v1**2 / np.sum(raw_eigen.v1**2)).tolist())),
        "files": ["collective_trend.csv"],
    }

    def partial_stage() -> dict:
        source = trend_panel if config.partial_hp else panel
        g_src = eigenportfolio(eigen_sym(pearson_corr(source)).v1, source) if config.partial_hp else g
        fit = fit_factor(source, g_src)
        resid = residual_panel(source, g_src, fit)
        p = pearson_corr(resid, kind="partial")
        files = [
            out.write("partial_corr.csv", p.to_csv()),
            out.write("factor_fit.csv", fit.to_csv()),
            out.write("residual_paths.csv", series_csv(resid.periods, dict(zip(resid.entities, resid.values)))),
        ]
        block = _cluster_block(out, "partial", p, sched)
        block["files"] = files + block["files"]
        return {
            "source": "hp_trend" if config.partial_hp else "raw",
            "factor": {
                "alpha": dict(zip(fit.entities, fit.alpha.tolist())),
                "beta": dict(zip(fit.entities, fit.beta.tolist())),
                "r2": dict(zip(fit.entities, fit.r2.tolist())),
            },
            "corr": p.to_json(),
            **block,
        }

    report["partial"] = _stage("partial", partial_stage)

    def decomposition_stage() -> dict:
        market, rest = decompose_market(raw, raw_eigen)
        files = [
            out.write("market_component.csv", market.to_csv()),
            out.write("residual_component.csv", rest.to_csv()),
        ]
        block = _cluster_block(out, "residual_component", rest, sched)
        block["files"] = files + block["files"]
        return {"market": market.to_json(), "residual": rest.to_json(), **block}

    report["decomposition"] = _stage("decomposition", decomposition_stage)

    d = differentials(panel, g)

    def differential_stage() -> dict:
        c = pearson_corr(d.values, labels=d.entities, kind="differential")
        es = eigen_sym(c)
        files = [out.write("diff_corr.csv", c.to_csv()), out.write("diff_eigen.csv", es.to_csv())]
        block = _cluster_block(out, "diff", c, sched)
        part = Partition(tuple(tuple(x) for x in block["partition"]["groups"]), tuple(block["partition"]["order"]))
        clubs = club_trend_analysis(d, part.groups)
        club_out = []
        columns: dict[str, np.ndarray] = {}
        for k, ct in enumerate(clubs, start=1):
            entry: dict[str, Any] = {"members": list(ct.members), "eigen": None}
            if ct.eigen is not None:
                entry["eigen"] = ct.eigen.to_json()
                entry["files"] = [out.write(f"club_{k}_eigen.csv", ct.eigen.to_csv())]
            club_out.append(entry)
            columns[f"G_club{k}"] = ct.trend
        columns.update({f"D_{e}": row for e, row in zip(d.entities, d.values)})
        files.append(out.write("club_trends.csv", series_csv(d.periods, columns)))
        block["files"] = files + block["files"]
        return {"corr": c.to_json(), "eigen": es.to_json(), **block, "clubs": club_out}

    report["differential"] = _stage("differential", differential_stage)

    def logt_stage() -> dict:
        clubset = club_cluster(panel, config.logt, config.hp if config.logt_hp else None)
        analysed = hp_panel(panel, config.hp) if config.logt_hp else panel
        h = transition_paths(analysed)
        rows = ["club,members,b_hat,t_stat"]
        for k, (members, res) in enumerate(zip(clubset.clubs, clubset.per_club_results), start=1):
            b = "" if res is None else repr(res.b_hat)
            t = "" if res is None else repr(res.t_stat)
            rows.append(f"{k},{' '.join(members)},{b},{t}")
        files = [
            out.write("transition_paths.csv", series_csv(analysed.periods, dict(zip(analysed.entities, h)))),
            out.write("logt_clubs.csv", "\n".join(rows) + "\n"),
        ]
        return {
            "hp_filter": config.logt_hp,
            "hp_lambda": config.hp.lam if config.logt_hp else None,
            **clubset.to_json(),
            "files": files,
        }

    report["logt"] = _stage("logt", logt_stage)

    report_text = json.dumps(report, indent=2, sort_keys=False, allow_nan=False) + "\n"
    out.write("report.json", report_text)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "files": [{"name": k, "sha256": v} for k, v in sorted(out.files.items())],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return report
