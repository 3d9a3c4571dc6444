"""Classification and trajectory metrics plus CSV/SVG report emission.

Full-state accuracy counts a frame correct only when every leg matches.
FPR = FP/(FP+TN) and FNR = FN/(FN+TP) per leg; a rate whose denominator is
zero is reported as absent (None), never as 0 — an all-negative stream has
no meaningful FNR.

Trajectory comparison aligns yaw and translation only (4 DoF): gravity
makes roll and pitch observable to the odometry filter, so aligning them
away would hide real error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .kinematics import LEG_NAMES

ASSOC_TOL_S = 0.002


class LengthMismatchError(ValueError):
    pass


class NoOverlapError(ValueError):
    pass


@dataclass
class LegCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class ClassificationReport:
    frames: int
    full_state_accuracy: float
    leg_accuracy: np.ndarray  # (L,)
    leg_average_accuracy: float
    leg_fpr: list  # per leg, None when FP+TN == 0
    leg_fnr: list  # per leg, None when FN+TP == 0
    average_fpr: Optional[float]
    average_fnr: Optional[float]
    counts: list  # LegCounts per leg


@dataclass
class TrajectoryReport:
    rmse: float  # m, over associated pairs
    final_drift: float  # m
    final_drift_pct: float  # % of ground-truth path length
    path_length: float  # m
    error_t: np.ndarray  # (M,)
    error_xyz: np.ndarray  # (M, 3) est - gt per axis


@dataclass
class Trajectory:
    t: np.ndarray  # (N,)
    p: np.ndarray  # (N, 3)
    rot: Optional[np.ndarray] = None  # (N, 3, 3)


def classification_metrics(pred, gt) -> ClassificationReport:
    """Compare two (N, L) boolean contact streams."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise LengthMismatchError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    n, num_legs = pred.shape
    if n == 0:
        raise LengthMismatchError("empty streams")
    full = float(np.mean(np.all(pred == gt, axis=1)))
    leg_acc = (pred == gt).mean(axis=0)
    counts = []
    fprs, fnrs = [], []
    for leg in range(num_legs):
        p, g = pred[:, leg], gt[:, leg]
        tp = int(np.sum(p & g))
        fp = int(np.sum(p & ~g))
        tn = int(np.sum(~p & ~g))
        fn = int(np.sum(~p & g))
        counts.append(LegCounts(tp, fp, tn, fn))
        fprs.append(fp / (fp + tn) if fp + tn > 0 else None)
        fnrs.append(fn / (fn + tp) if fn + tp > 0 else None)
    have_fpr = [x for x in fprs if x is not None]
    have_fnr = [x for x in fnrs if x is not None]
    return ClassificationReport(
        frames=n,
        full_state_accuracy=full,
        leg_accuracy=leg_acc,
        leg_average_accuracy=float(leg_acc.mean()),
        leg_fpr=fprs,
        leg_fnr=fnrs,
        average_fpr=float(np.mean(have_fpr)) if have_fpr else None,
        average_fnr=float(np.mean(have_fnr)) if have_fnr else None,
        counts=counts,
    )


def _associate(t_est, t_gt, tol):
    idx = np.searchsorted(t_gt, t_est)
    idx = np.clip(idx, 1, len(t_gt) - 1)
    left = idx - 1
    pick = np.where(np.abs(t_gt[idx] - t_est) < np.abs(t_gt[left] - t_est), idx, left)
    ok = np.abs(t_gt[pick] - t_est) <= tol
    return np.nonzero(ok)[0], pick[ok]


def align_trajectories(est: Trajectory, gt: Trajectory, tol: float = ASSOC_TOL_S):
    """4-DoF (yaw + translation) alignment minimizing position RMSE.

    Returns (aligned estimate, (rotation, translation)). Poses associate by
    nearest timestamp within tol seconds.
    """
    if len(est.t) < 2 or len(gt.t) < 2:
        raise NoOverlapError("need at least two poses per trajectory")
    ei, gi = _associate(est.t, gt.t, tol)
    if len(ei) < 2:
        raise NoOverlapError("no timestamp overlap within tolerance")
    a = est.p[ei]
    b = gt.p[gi]
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    a0 = a - ca
    b0 = b - cb
    num = np.sum(a0[:, 0] * b0[:, 1] - a0[:, 1] * b0[:, 0])
    den = np.sum(a0[:, 0] * b0[:, 0] + a0[:, 1] * b0[:, 1])
    yaw = np.arctan2(num, den)
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    trans = cb - rot @ ca
    aligned = Trajectory(
        est.t.copy(),
        est.p @ rot.T + trans,
        None if est.rot is None else np.einsum("ij,njk->nik", rot, est.rot),
    )
    return aligned, (rot, trans)


def trajectory_metrics(est: Trajectory, gt: Trajectory, tol: float = ASSOC_TOL_S) -> TrajectoryReport:
    """RMSE / final drift / path length over associated (pre-aligned) poses."""
    if len(est.t) < 1 or len(gt.t) < 2:
        raise NoOverlapError("need poses on both trajectories")
    ei, gi = _associate(est.t, gt.t, tol)
    if len(ei) < 1:
        raise NoOverlapError("no timestamp overlap within tolerance")
    err = est.p[ei] - gt.p[gi]
    rmse = float(np.sqrt(np.mean(np.sum(err**2, axis=1))))
    drift = float(np.linalg.norm(err[-1]))
    path = float(np.sum(np.linalg.norm(np.diff(gt.p, axis=0), axis=1)))
    if path <= 0.0:
        raise ValueError("ground-truth path has zero length")
    return TrajectoryReport(
        rmse=rmse,
        final_drift=drift,
        final_drift_pct=100.0 * drift / path,
        path_length=path,
        error_t=est.t[ei].copy(),
        error_xyz=err,
    )


# ---------------------------------------------------------------------------
# trajectory files (t, x, y, z)

TRAJECTORY_HEADER = "t,x,y,z"


def write_trajectory(path, traj: Trajectory):
    with open(path, "w") as f:
        f.write(TRAJECTORY_HEADER + "\n")
        for ti, pi in zip(traj.t, traj.p):
            f.write(f"{float(ti)!r},{float(pi[0])!r},{float(pi[1])!r},{float(pi[2])!r}\n")


def read_trajectory(path) -> Trajectory:
    with open(path) as f:
        header = f.readline().rstrip("\n")
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"{path}:1: unexpected header {header!r}")
        rows = [[float(v) for v in line.rstrip("\n").split(",")] for line in f if line.strip()]
    arr = np.asarray(rows)
    return Trajectory(arr[:, 0], arr[:, 1:4])


# ---------------------------------------------------------------------------
# report export


def _fmt(x):
    return "" if x is None else f"{x:.6f}"


def write_classification_csv(path, reports: Dict[str, ClassificationReport]):
    names = LEG_NAMES
    with open(path, "w") as f:
        header = ["name", "frames", "full_state_acc"]
        header += [f"acc_{n}" for n in names]
        header += ["leg_avg_acc"]
        header += [f"fpr_{n}" for n in names] + ["avg_fpr"]
        header += [f"fnr_{n}" for n in names] + ["avg_fnr"]
        f.write(",".join(header) + "\n")
        for name, rep in reports.items():
            row = [name, str(rep.frames), _fmt(rep.full_state_accuracy)]
            row += [_fmt(a) for a in rep.leg_accuracy] + [_fmt(rep.leg_average_accuracy)]
            row += [_fmt(x) for x in rep.leg_fpr] + [_fmt(rep.average_fpr)]
            row += [_fmt(x) for x in rep.leg_fnr] + [_fmt(rep.average_fnr)]
            f.write(",".join(row) + "\n")


def write_trajectory_metrics_csv(path, reports: Dict[str, TrajectoryReport]):
    with open(path, "w") as f:
        f.write("name,rmse_m,final_drift_m,final_drift_pct,path_length_m\n")
        for name, rep in reports.items():
            f.write(
                f"{name},{_fmt(rep.rmse)},{_fmt(rep.final_drift)},"
                f"{_fmt(rep.final_drift_pct)},{_fmt(rep.path_length)}\n"
            )


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _polyline(points, color):
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{coords}"/>'


def _scaled(xs, ys, box):
    x0, y0, w, h = box
    xmin, xmax = float(np.min(xs)), float(np.max(xs))
    ymin, ymax = float(np.min(ys)), float(np.max(ys))
    xr = xmax - xmin or 1.0
    yr = ymax - ymin or 1.0
    px = x0 + (np.asarray(xs) - xmin) / xr * w
    py = y0 + h - (np.asarray(ys) - ymin) / yr * h
    return np.stack([px, py], axis=1)


def write_trajectory_svg(path, trajectories: Dict[str, Trajectory]):
    """Bird's-eye XY plot, one polyline per trajectory, deterministic bytes."""
    width, height, margin = 640, 480, 40
    all_x = np.concatenate([t.p[:, 0] for t in trajectories.values()])
    all_y = np.concatenate([t.p[:, 1] for t in trajectories.values()])
    xmin, xmax = float(all_x.min()), float(all_x.max())
    ymin, ymax = float(all_y.min()), float(all_y.max())
    xr = xmax - xmin or 1.0
    yr = ymax - ymin or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, (name, traj) in enumerate(trajectories.items()):
        px = margin + (traj.p[:, 0] - xmin) / xr * (width - 2 * margin)
        py = height - margin - (traj.p[:, 1] - ymin) / yr * (height - 2 * margin)
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        parts.append(_polyline(np.stack([px, py], axis=1), color))
        parts.append(
            f'<text x="{margin}" y="{20 + 14 * i}" fill="{color}" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def write_axes_svg(path, trajectories: Dict[str, Trajectory]):
    """Per-axis position vs time, three stacked panels."""
    width, panel_h, margin = 640, 160, 30
    height = 3 * panel_h
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for axis, label in enumerate("xyz"):
        box = (margin, axis * panel_h + margin / 2, width - 2 * margin, panel_h - margin)
        for i, (name, traj) in enumerate(trajectories.items()):
            pts = _scaled(traj.t, traj.p[:, axis], box)
            parts.append(_polyline(pts, _SVG_COLORS[i % len(_SVG_COLORS)]))
        parts.append(
            f'<text x="4" y="{axis * panel_h + panel_h // 2}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def export_report(
    outdir,
    classification: Optional[Dict[str, ClassificationReport]] = None,
    trajectories: Optional[Dict[str, Trajectory]] = None,
    trajectory_reports: Optional[Dict[str, TrajectoryReport]] = None,
    formats=("csv", "svg"),
):
    """Write the standard report files into outdir; returns written paths."""
    import os

    os.makedirs(outdir, exist_ok=True)
    written = []
    if "csv" in formats and classification:
        p = os.path.join(outdir, "classification.csv")
        write_classification_csv(p, classification)
        written.append(p)
    if "csv" in formats and trajectory_reports:
        p = os.path.join(outdir, "trajectory_metrics.csv")
        write_trajectory_metrics_csv(p, trajectory_reports)
        written.append(p)
    if "svg" in formats and trajectories:
        p = os.path.join(outdir, "trajectory_xy.svg")
        write_trajectory_svg(p, trajectories)
        written.append(p)
        p = os.path.join(outdir, "trajectory_axes.svg")
        write_axes_svg(p, trajectories)
        written.append(p)
    return written
