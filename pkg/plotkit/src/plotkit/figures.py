"""The four standard figures, rendered from experiment CSVs alone.

Inputs are the simulation harness's declared CSV schemas; nothing is
recomputed from trajectories and the harness itself is never imported.
Rendering is a pure function of spec + file contents: fixed DPI, fixed
fonts, salted SVG ids and no embedded dates, so re-rendering identical
inputs yields identical bytes.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams.update({
    "svg.hashsalt": "plotkit",
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 9,
})

KINDS = ("tail_decay", "smoothing_norms", "residual_order", "absorbing_ensemble")

SCHEMAS = {
    "spectrum": ("k", "abs_u", "abs_D"),
    "smoothing_series": ("t", "theta", "Hs_u", "Hs_eps_D", "Hs_D",
                         "band_N16_D", "band_N32_D", "band_N64_D", "band_N128_D",
                         "slope_D", "mass", "energy"),
    "residual_order": ("dt", "mass_residual_rel", "energy_residual_rel"),
    "member": ("t", "H1_u", "mass", "energy", "mass_residual",
               "energy_residual", "H1eps_diff"),
    "sweep": ("member_id", "u0_norm", "longtime_H1_max", "R_star", "flags"),
}


class SchemaMismatch(ValueError):
    """The CSV does not carry the columns the figure kind requires."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    out: str
    manifest: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("need at least one input CSV")

    @classmethod
    def from_file(cls, path) -> "FigureSpec":
        data = json.loads(Path(path).read_text())
        return cls(**data)


@dataclass
class RenderResult:
    files: list[Path]
    fitted_slope: float | None = None
    skipped: list[str] = field(default_factory=list)


def load_table(path, schema_name: str) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = tuple(lines[0].split(","))
    want = SCHEMAS[schema_name]
    if header != want:
        raise SchemaMismatch(
            f"{path}: expected columns {want}, found {header}"
        )
    if len(lines) == 1:
        return {name: np.empty(0) for name in want}
    body = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return {name: body[:, i] for i, name in enumerate(want)}


def _manifest_experiment(spec: FigureSpec) -> dict:
    if spec.manifest is None:
        return {}
    data = json.loads(Path(spec.manifest).read_text())
    out = dict(data.get("config", {}).get("experiment", {}))
    out["R_star"] = None
    return out


def fit_dyadic_slope(k: np.ndarray, mag: np.ndarray, k_min: int = 8) -> float | None:
    """Least-squares decay exponent of mag over full dyadic bins of |k|;
    None when fewer than three bins fit."""
    a = np.abs(k)
    xs, ys = [], []
    lo = k_min
    while 2 * lo - 1 <= a.max():
        sel = (a >= lo) & (a < 2 * lo) & (mag > 0)
        if np.any(sel):
            xs.append(np.mean(np.log(np.sqrt(1.0 + a[sel] ** 2))))
            ys.append(np.mean(np.log(mag[sel])))
        lo *= 2
    if len(xs) < 3:
        return None
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def _save(fig, out: str) -> list[Path]:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    files = []
    for suffix, meta in ((".png", {"Software": "plotkit"}),
                         (".svg", {"Date": None})):
        target = out.with_suffix(suffix)
        fig.savefig(target, metadata=meta)
        files.append(target)
    plt.close(fig)
    return files


def _render_tail_decay(spec: FigureSpec) -> RenderResult:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    skipped = []
    slope = None
    for path in spec.inputs:
        table = load_table(path, "spectrum")
        if table["k"].size == 0:
            print(f"plotkit: skipping empty series {path}", file=sys.stderr)
            skipped.append(str(path))
            continue
        pos = table["k"] > 0
        k = table["k"][pos]
        for name, style in (("abs_u", "-"), ("abs_D", "--")):
            mag = table[name][pos]
            ok = mag > 0
            ax.loglog(k[ok], mag[ok], style, lw=1.0,
                      label=f"{Path(path).stem}:{name}")
        slope = fit_dyadic_slope(table["k"], table["abs_D"])
        if slope is None:
            slope = fit_dyadic_slope(table["k"], table["abs_u"])
        if slope is not None:
            anchor = max(float(np.min(k[k >= 8])), 8.0)
            ref = table["abs_u"][pos][k >= anchor][0]
            kk = np.array([anchor, float(k.max())])
            ax.loglog(kk, ref * (kk / anchor) ** slope, ":", color="k",
                      label=f"fitted slope {slope:.3f}")
    exp = _manifest_experiment(spec)
    if "s" in exp and "epsilon" in exp:
        guide = -(float(exp["s"]) + float(exp["epsilon"])) - 0.5
        ax.loglog([], [], " ", label=f"reference slope {guide:.3f}")
    ax.set_xlabel("k")
    ax.set_ylabel("|coefficient|")
    ax.set_title("spectral tail decay")
    ax.legend(fontsize=7)
    return RenderResult(_save(fig, spec.out), fitted_slope=slope, skipped=skipped)


def _render_smoothing_norms(spec: FigureSpec) -> RenderResult:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    skipped = []
    for path in spec.inputs:
        table = load_table(path, "smoothing_series")
        if table["t"].size == 0:
            print(f"plotkit: skipping empty series {path}", file=sys.stderr)
            skipped.append(str(path))
            continue
        ax.plot(table["t"], table["Hs_u"], "-", label="H^s of u")
        ax.plot(table["t"], table["Hs_eps_D"], "--", label="H^(s+eps) of D")
        ax.plot(table["t"], table["Hs_D"], ":", label="H^s of D")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title("smoothing difference norms")
    ax.legend(fontsize=7)
    return RenderResult(_save(fig, spec.out), skipped=skipped)


def _render_residual_order(spec: FigureSpec) -> RenderResult:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    skipped = []
    anchor = None
    for path in spec.inputs:
        table = load_table(path, "residual_order")
        if table["dt"].size == 0:
            print(f"plotkit: skipping empty series {path}", file=sys.stderr)
            skipped.append(str(path))
            continue
        ax.loglog(table["dt"], table["mass_residual_rel"], "o-", label="mass residual")
        ax.loglog(table["dt"], table["energy_residual_rel"], "s-", label="energy residual")
        anchor = (table["dt"], table["energy_residual_rel"])
    if anchor is not None and anchor[0].size:
        dts = np.sort(anchor[0])
        ref = anchor[1][np.argmax(anchor[0])]
        ax.loglog(dts, ref * (dts / dts.max()) ** 2, ":", color="k", label="slope 2 guide")
    ax.set_xlabel("dt")
    ax.set_ylabel("relative residual")
    ax.set_title("balance-law residual convergence")
    ax.legend(fontsize=7)
    return RenderResult(_save(fig, spec.out), skipped=skipped)


def _render_absorbing_ensemble(spec: FigureSpec) -> RenderResult:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    skipped = []
    r_star = None
    for path in spec.inputs:
        name = Path(path).name
        if name.startswith("sweep"):
            sweep = load_table(path, "sweep")
            if sweep["R_star"].size:
                r_star = float(sweep["R_star"][0])
            continue
        table = load_table(path, "member")
        if table["t"].size == 0:
            print(f"plotkit: skipping empty series {path}", file=sys.stderr)
            skipped.append(str(path))
            continue
        ax.semilogy(table["t"], table["H1_u"], lw=1.0, label=Path(path).stem)
    if r_star is not None:
        ax.axhspan(0.95 * r_star, 1.05 * r_star, color="0.8", label=f"R* = {r_star:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("H^1 norm")
    ax.set_title("absorbing-set ensemble")
    ax.legend(fontsize=7)
    return RenderResult(_save(fig, spec.out), skipped=skipped)


_RENDERERS = {
    "tail_decay": _render_tail_decay,
    "smoothing_norms": _render_smoothing_norms,
    "residual_order": _render_residual_order,
    "absorbing_ensemble": _render_absorbing_ensemble,
}


def render(spec: FigureSpec) -> RenderResult:
    return _RENDERERS[spec.kind](spec)
