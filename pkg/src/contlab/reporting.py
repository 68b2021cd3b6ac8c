"""Report emission: machine JSON, delimited CSV series, aligned text summary
and matplotlib figures rendered to files alongside the data."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .scenarios import ScenarioReport, load_config
from .util import config_hash


def report_stem(report: ScenarioReport) -> str:
    """Canonical configs keep the bare scenario name; tampered or overridden
    configs gain the config-hash suffix so artifacts never collide."""
    try:
        canonical = config_hash(load_config(report.name))
    except KeyError:
        canonical = None
    if canonical == report.config_hash:
        return report.name
    return "%s-%s" % (report.name, report.config_hash)


def emit_report(report: ScenarioReport, outdir: str | Path) -> list[Path]:
    """Write every artifact for a scenario run; returns the created paths."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise PermissionError("output directory is not writable: %s" % exc)
    stem = report_stem(report)
    created = []

    json_path = outdir / (stem + ".report.json")
    json_path.write_text(json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n")
    created.append(json_path)

    txt_path = outdir / (stem + ".txt")
    txt_path.write_text(format_text(report))
    created.append(txt_path)

    created += emit_series(report, outdir, stem)
    created += emit_figures(report, outdir, stem)
    return created


def format_text(report: ScenarioReport) -> str:
    lines = ["scenario %s  [%s]  config %s" % (report.name, report.kind, report.config_hash),
             "-" * 72]
    width = max(len(o.name) for o in report.observables)
    for o in report.observables:
        measured = o.measured
        if isinstance(measured, float):
            measured = "%.6g" % measured
        elif isinstance(measured, list):
            measured = "[" + ", ".join("%.4g" % v for v in measured) + "]"
        lines.append("%-*s  %-20s %-5s  measured=%s" %
                     (width, o.name, "%s %s" % (o.check, o.target if o.target is not None else ""),
                      "PASS" if o.passed else "FAIL", measured))
    lines.append("-" * 72)
    lines.append("overall: %s" % ("PASS" if report.passed else "FAIL"))
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def emit_series(report: ScenarioReport, outdir: Path, stem: str) -> list[Path]:
    b = report.blocks
    created = []
    if "J_moving" in b or "J_a" in b:
        ks = b["ks"]
        cols, names = [], []
        for key, label in (("J_moving", "J_moving"), ("J_stationary", "J_stationary"),
                           ("J_a", "J_a"), ("J_b", "J_b")):
            if key in b:
                cols.append(b[key])
                names.append(label)
        rows = [[k] + [c[i] for c in cols] for i, k in enumerate(ks)]
        created.append(_write_csv(outdir / (stem + ".J.csv"), ["k"] + names, rows))
    if "gap" in b:
        rows = [[g["k"], g["lhs"], g["bound"], g["C_tilde"], g["J_k"]] for g in b["gap"]]
        created.append(_write_csv(outdir / (stem + ".gap.csv"),
                                  ["k", "lhs", "bound", "C_tilde", "J_k"], rows))
    if "medians" in b:
        rows = []
        for eps in b["eps"]:
            med = b["medians"]["%g" % eps]
            near = dict(zip(b["eps"], b["near_zero_masses"]))
            dist = dict(zip(b["eps"], b["terminal_distances"]))
            for t, m_t, x_t in zip(b["times"], med, b["extreme"]):
                rows.append([eps, t, m_t, near[eps], abs(m_t - x_t)])
        created.append(_write_csv(outdir / (stem + ".selection.csv"),
                                  ["eps", "t", "median", "mass_near_zero",
                                   "distance_to_extreme"], rows))
    if "moments" in b:
        rows = []
        for k in b["ks"]:
            for t, m in zip(b["times"], b["moments"][str(k)]):
                rows.append([k, t, m])
        created.append(_write_csv(outdir / (stem + ".moments.csv"), ["k", "t", "moment"], rows))
    if "trajectory" in b:
        rows = b["trajectory"]
        names = ["t"] + ["x%d" % i for i in range(1, len(rows[0]))]
        created.append(_write_csv(outdir / (stem + ".trajectory.csv"), names, rows))
    if "limit_devs_by_k" in b:
        rows = [[k, d] for k, d in zip(b["ks"], b["limit_devs_by_k"])]
        created.append(_write_csv(outdir / (stem + ".limit.csv"), ["k", "max_deviation"], rows))
    return created


def emit_figures(report: ScenarioReport, outdir: Path, stem: str) -> list[Path]:
    b = report.blocks
    created = []

    def save(fig, suffix):
        path = outdir / (stem + "." + suffix + ".png")
        fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
        plt.close(fig)
        created.append(path)

    if "J_moving" in b and "ks" in b:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.loglog(b["ks"], b["J_moving"], "o-", label="moving path")
        if "J_stationary" in b:
            ax.loglog(b["ks"], b["J_stationary"], "s--", label="stationary path")
        ax.set_xlabel("k")
        ax.set_ylabel(r"$J_k$")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        save(fig, "J")
    if "J_a" in b:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.loglog(b["ks"], b["J_a"], "o-", label="path A")
        ax.loglog(b["ks"], b["J_b"], "s--", label="path B")
        ax.set_xlabel("k")
        ax.set_ylabel(r"$J_k$")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        save(fig, "J")
    if "gap" in b:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ks = [g["k"] for g in b["gap"]]
        ax.loglog(ks, [max(g["bound"], 1e-300) for g in b["gap"]], "o-", label="bound")
        lhs = [g["lhs"] for g in b["gap"]]
        if any(abs(v) > 0 for v in lhs):
            ax.loglog(ks, [max(abs(v), 1e-300) for v in lhs], "k:", label="|lhs|")
        ax.set_xlabel("k")
        ax.set_ylabel("duality gap")
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        save(fig, "gap")
    if "medians" in b:
        fig, ax = plt.subplots(figsize=(5.6, 3.6))
        for eps in b["eps"]:
            ax.plot(b["times"], b["medians"]["%g" % eps], label=r"$\epsilon$=%g" % eps)
        ax.plot(b["times"], b["extreme"], "k--", lw=2, label="upper extreme")
        ax.set_xlabel("t")
        ax.set_ylabel("median")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        save(fig, "selection")
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.loglog(b["eps"], b["terminal_distances"], "o-")
        ax.set_xlabel(r"$\epsilon$")
        ax.set_ylabel("terminal median distance")
        ax.grid(True, which="both", alpha=0.3)
        save(fig, "distance")
    if "moments" in b:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for k in b["ks"]:
            ax.plot(b["times"], b["moments"][str(k)], label="k=%d" % k)
        ax.set_xlabel("t")
        ax.set_ylabel("weight moment")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        save(fig, "moments")
    if "trajectory" in b and len(b["trajectory"][0]) == 3:
        import numpy as np
        arr = np.asarray(b["trajectory"])
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        ax.plot(arr[:, 1], arr[:, 2], "-")
        ax.plot([b["expected_endpoint"][0]], [b["expected_endpoint"][1]], "rx")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal")
        ax.grid(alpha=0.3)
        save(fig, "trajectory")
    if "g_profiles" in b:
        fig, ax = plt.subplots(figsize=(5.6, 3.6))
        xs = b["g_profiles"]["x"]
        for k in b["ks"]:
            ax.plot(xs, b["g_profiles"][str(k)], label="k=%d" % k)
        ax.set_xlabel("x")
        ax.set_ylabel(r"$|b-b_k|\sqrt{V_k}$")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        save(fig, "g")
    return created
