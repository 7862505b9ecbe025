//! Standalone matplotlib scripts written next to the data they plot.

const READ_CSV: &str = r#"import csv
import math
import sys
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def read_csv(name):
    with open(HERE / name, newline="") as f:
        rows = list(csv.DictReader(f))
    cols = {}
    for key in rows[0].keys() if rows else []:
        vals = []
        for r in rows:
            try:
                vals.append(float(r[key]))
            except ValueError:
                vals.append(r[key])
        cols[key] = vals
    return cols


def save(fig, name):
    out = HERE / name
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(out)
    if "--show" in sys.argv:
        plt.show()

"#;

const TERMS: &str = r#"
TERMS = ["ZX", "ZY", "ZZ", "IX", "IY", "IZ", "ZI"]


def plot_terms(data, xlabel, bands):
    x = data["grid_value"]
    fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex=True)
    for ax, term in zip(axes.flat, ["ZX", "ZY", "ZZ", "IX", "IY", "IZ"]):
        y = [v if isinstance(v, float) else math.nan for v in data[term + "_MHz"]]
        for lo, hi in bands:
            ax.axvspan(lo, hi, color="tab:green", alpha=0.15, lw=0)
        ax.plot(x, y, ".-", ms=3)
        ax.set_title(term)
        ax.axhline(0.0, color="k", lw=0.5)
    for ax in axes[1]:
        ax.set_xlabel(xlabel)
    for ax in axes[:, 0]:
        ax.set_ylabel("coefficient / 2pi (MHz)")
    fig.tight_layout()
    return fig
"#;

pub fn sweep_detuning(csv: &str) -> String {
    format!(
        "{READ_CSV}{TERMS}\n\nfig = plot_terms(read_csv(\"{csv}\"), \"-Delta_TA / delta_T\", [(0.2, 0.4), (0.6, 0.8)])\nsave(fig, \"sweep_detuning.png\")\n"
    )
}

pub fn sweep_amplitude(csv: &str) -> String {
    format!("{READ_CSV}{TERMS}\n\nfig = plot_terms(read_csv(\"{csv}\"), \"drive amplitude / 2pi (MHz)\", [])\nsave(fig, \"sweep_amplitude.png\")\n")
}

pub fn trajectory(csv: &str, xlabel: &str, png: &str) -> String {
    format!(
        r#"{READ_CSV}
data = read_csv("{csv}")
fig, axes = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
for c, style in ((0.0, "-"), (1.0, "--")):
    idx = [i for i, s in enumerate(data["control_state"]) if s == c]
    t = [data["t_ns"][i] for i in idx]
    for ax, key in zip(axes, ["x", "y", "z", "control_z"]):
        ax.plot(t, [data[key][i] for i in idx], style, label="control |%d>" % c)
for ax, key in zip(axes, ["<X>", "<Y>", "<Z>", "control <Z>"]):
    ax.set_ylabel(key)
    ax.set_ylim(-1.05, 1.05)
axes[0].legend(loc="upper right")
axes[-1].set_xlabel("{xlabel}")
fig.tight_layout()
save(fig, "{png}")
"#
    )
}

pub fn chi(files: &[&str]) -> String {
    let list = files.iter().map(|f| format!("\"{f}\"")).collect::<Vec<_>>().join(", ");
    format!(
        r#"import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
FILES = [{list}]

fig, axes = plt.subplots(2, len(FILES), figsize=(5 * len(FILES), 9), squeeze=False)
for col, name in enumerate(FILES):
    d = json.loads((HERE / name).read_text())
    n = len(d["labels"])
    for row, part in enumerate(("re", "im")):
        m = np.array(d[part]).reshape(n, n)
        ax = axes[row, col]
        im = ax.imshow(m, cmap="RdBu_r", vmin=-0.5, vmax=0.5)
        ax.set_xticks(range(n), d["labels"], rotation=90, fontsize=6)
        ax.set_yticks(range(n), d["labels"], fontsize=6)
        ax.set_title("%s %s" % (part.capitalize(), name))
fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.6)
out = HERE / "chi.png"
fig.savefig(out, dpi=150, bbox_inches="tight")
print(out)
if "--show" in sys.argv:
    plt.show()
"#
    )
}

pub fn rb(files: &[&str]) -> String {
    let list = files.iter().map(|f| format!("\"{f}\"")).collect::<Vec<_>>().join(", ");
    format!(
        r#"{READ_CSV}
import json

fit = json.loads((HERE / "rb_fit.json").read_text())
fig, ax = plt.subplots(figsize=(6, 4))
for name in [{list}]:
    data = read_csv(name)
    key = "interleaved" if "interleaved" in name else "reference"
    ax.errorbar(data["length"], data["mean_survival"], yerr=data["std"], fmt="o", ms=4, label=key)
    f = fit[key]
    m = range(0, int(max(data["length"])) + 1)
    ax.plot(m, [f["a"] * f["alpha"] ** k + f["b"] for k in m], "-", lw=1)
ax.set_xlabel("Clifford length m")
ax.set_ylabel("ground state population")
ax.legend()
fig.tight_layout()
save(fig, "rb.png")
"#
    )
}
