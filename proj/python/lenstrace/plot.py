"""Render the CSV written by `lenstrace plot ...` to a PNG.

    python -m lenstrace.plot curve.csv out.png
"""

import argparse
import csv
import sys


def render(csv_path, png_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{csv_path} has no data rows")
    columns = list(rows[0].keys())
    fig, ax = plt.subplots(figsize=(6, 4))
    if "frequency" in columns:
        for key in sorted({(r["row"], r["col"]) for r in rows}):
            cell = [r for r in rows if (r["row"], r["col"]) == key]
            ax.plot([float(r["frequency"]) for r in cell], [float(r["sagittal"]) for r in cell], lw=0.8)
        ax.set_xlabel("cycles / pixel")
        ax.set_ylabel("sagittal MTF")
    else:
        ordered = sorted(rows, key=lambda r: float(r["fov"]))
        fov = [float(r["fov"]) for r in ordered]
        for name in columns:
            if name in ("row", "col", "fov"):
                continue
            ax.plot(fov, [float(r[name]) for r in ordered], "o-", ms=3, label=name)
        ax.set_xlabel("normalized field")
        ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("png")
    args = parser.parse_args(argv)
    render(args.csv, args.png)
    return 0


if __name__ == "__main__":
    sys.exit(main())
