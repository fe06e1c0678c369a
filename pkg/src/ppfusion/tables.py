"""CSV schemas shared by the simulator and the fitting pipeline.

Simulated and real data are interchangeable: whatever cmd_simulate writes,
cmd_fit reads back. Floats are serialized with repr for exact round-trips.

Schemas:
    transects.csv            transect_id,x_km,y_km,vertex_order
    hydrophones.csv          hydrophone_id,x_km,y_km,noise_db
    pattern.csv              x_km,y_km[,<mark>...]
    aerial_observations.csv  transect_id,x_km,y_km
    pam_counts.csv           hydrophone_id,count
    samples.csv              draw,beta0[,beta1,...],sigma2[,pi][,c]
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ppfusion.detection import Hydrophone
from ppfusion.grid import Transect
from ppfusion.intensity import PointPattern
from ppfusion.mcmc import PosteriorSamples
from ppfusion.observe import AerialObservation, PamObservation


def _fmt(value) -> str:
    return repr(float(value))


def _write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ----- transects -----------------------------------------------------------


def write_transects(path, transects: list[Transect]) -> None:
    rows = []
    for t in transects:
        for order, (x, y) in enumerate(t.vertices):
            rows.append([t.id, _fmt(x), _fmt(y), order])
    _write_rows(path, ["transect_id", "x_km", "y_km", "vertex_order"], rows)


def read_transects(path) -> list[Transect]:
    groups: dict[str, list[tuple[int, float, float]]] = {}
    order_seen: list[str] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tid = row["transect_id"]
            if tid not in groups:
                groups[tid] = []
                order_seen.append(tid)
            groups[tid].append((int(row["vertex_order"]), float(row["x_km"]), float(row["y_km"])))
    transects = []
    for tid in order_seen:
        verts = sorted(groups[tid])
        transects.append(Transect(id=tid, vertices=np.array([[x, y] for _, x, y in verts])))
    return transects


# ----- hydrophones ----------------------------------------------------------


def write_hydrophones(path, hydrophones: list[Hydrophone], default_noise_db: float) -> None:
    rows = [
        [h.id, _fmt(h.location[0]), _fmt(h.location[1]),
         _fmt(h.noise_db if h.noise_db is not None else default_noise_db)]
        for h in hydrophones
    ]
    _write_rows(path, ["hydrophone_id", "x_km", "y_km", "noise_db"], rows)


def read_hydrophones(path) -> list[Hydrophone]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                Hydrophone(
                    id=row["hydrophone_id"],
                    location=np.array([float(row["x_km"]), float(row["y_km"])]),
                    noise_db=float(row["noise_db"]),
                )
            )
    return out


# ----- point patterns --------------------------------------------------------


def write_pattern(path, pattern: PointPattern) -> None:
    mark_names = sorted(pattern.marks)
    header = ["x_km", "y_km"] + mark_names
    rows = []
    for i, (x, y) in enumerate(pattern.points):
        row = [_fmt(x), _fmt(y)]
        row.extend(repr(pattern.marks[m][i].item()) for m in mark_names)
        rows.append(row)
    _write_rows(path, header, rows)


def read_pattern(path) -> PointPattern:
    points, marks = [], {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        mark_names = [c for c in (reader.fieldnames or []) if c not in ("x_km", "y_km")]
        marks = {m: [] for m in mark_names}
        for row in reader:
            points.append([float(row["x_km"]), float(row["y_km"])])
            for m in mark_names:
                marks[m].append(float(row[m]))
    return PointPattern(
        points=np.array(points).reshape(-1, 2),
        marks={m: np.array(v) for m, v in marks.items()},
    )


# ----- observations -----------------------------------------------------------


def write_aerial_observations(path, observations: list[AerialObservation]) -> None:
    rows = []
    for obs in observations:
        for x, y in obs.detections:
            rows.append([obs.transect_id, _fmt(x), _fmt(y)])
    _write_rows(path, ["transect_id", "x_km", "y_km"], rows)


def read_aerial_observations(path, transect_ids: list[str]) -> list[AerialObservation]:
    """Read detections, returning one observation per known transect id
    (transects with no detections come back empty)."""
    grouped: dict[str, list[list[float]]] = {tid: [] for tid in transect_ids}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tid = row["transect_id"]
            if tid not in grouped:
                raise ValueError(f"detection references unknown transect {tid!r}")
            grouped[tid].append([float(row["x_km"]), float(row["y_km"])])
    return [
        AerialObservation(tid, np.array(pts).reshape(-1, 2)) for tid, pts in grouped.items()
    ]


def write_pam_counts(path, observations: list[PamObservation]) -> None:
    _write_rows(
        path,
        ["hydrophone_id", "count"],
        [[obs.hydrophone_id, obs.count] for obs in observations],
    )


def read_pam_counts(path) -> list[PamObservation]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(PamObservation(row["hydrophone_id"], int(row["count"])))
    return out


# ----- posterior draws ----------------------------------------------------------


def scalar_columns(samples: PosteriorSamples) -> dict[str, np.ndarray]:
    cols = {f"beta{j}": samples.beta[:, j] for j in range(samples.beta.shape[1])}
    cols["sigma2"] = samples.sigma2
    if samples.pi is not None:
        cols["pi"] = samples.pi
    if samples.c is not None:
        cols["c"] = samples.c
    return cols


def write_samples_csv(path, samples: PosteriorSamples) -> None:
    cols = scalar_columns(samples)
    header = ["draw"] + list(cols)
    rows = (
        [i] + [_fmt(cols[name][i]) for name in cols] for i in range(samples.n_draws)
    )
    _write_rows(path, header, rows)


def read_samples_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = [c for c in (reader.fieldnames or []) if c != "draw"]
        data = {c: [] for c in names}
        for row in reader:
            for c in names:
                data[c].append(float(row[c]))
    return {c: np.array(v) for c, v in data.items()}


def save_latent_stack(path, samples: PosteriorSamples) -> None:
    """Latent-field draws as a compressed binary stack (disk-bounded by stride)."""
    np.savez_compressed(
        path,
        w=samples.w,
        w_indices=samples.w_indices,
        active=samples.active,
        beta=samples.beta,
        sigma2=samples.sigma2,
        pi=samples.pi if samples.pi is not None else np.empty(0),
        c=samples.c if samples.c is not None else np.empty(0),
    )


def load_posterior(stack_path, acceptance: dict, meta: dict) -> PosteriorSamples:
    with np.load(stack_path) as arc:
        return PosteriorSamples(
            beta=arc["beta"],
            sigma2=arc["sigma2"],
            pi=arc["pi"] if arc["pi"].size else None,
            c=arc["c"] if arc["c"].size else None,
            w=arc["w"],
            w_indices=arc["w_indices"],
            active=arc["active"],
            acceptance=acceptance,
            meta=meta,
        )


def write_csv_table(path, header: list[str], rows: list[list]) -> None:
    """Generic deterministic CSV writer for report/sweep tables."""
    formatted = [
        [(_fmt(v) if isinstance(v, float) else v) for v in row] for row in rows
    ]
    _write_rows(path, header, formatted)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
