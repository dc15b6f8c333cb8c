"""Small plotting helper shared by the demos; plots are skipped without matplotlib."""

from pathlib import Path

OUT = Path(__file__).parent / "output"


def loglog(report, title, fname):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("(matplotlib not installed, skipping plot)")
        return None
    OUT.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for s in report.schemes:
        x, err = report.series(s)
        fit = report.fits.get(s)
        label = s if fit is None else f"{s} (slope {fit.slope:.2f})"
        ax.loglog(x, err, "o-", label=label)
    ax.set_xlabel(report.axis)
    ax.set_ylabel("error vs reference")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = OUT / fname
    fig.savefig(path, dpi=120)
    plt.close(fig)
    print(f"plot written to {path}")
    return path
