"""Figure rendering for the report commands.

Figures are written with the Agg backend and without timestamp metadata so
repeated runs produce identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

RATE_LABELS = {
    "di1": r"$r_{DI_1}$",
    "di2": r"$r_{DI_2}$",
    "dd6": r"$r_{DD(6\mathrm{-state})}$",
    "bb84": r"$r_{DD(BB84)}$",
    "dd": r"$r_{DD}$",
}

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
}

_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_distributions(summary, path):
    """One panel per rate, one curve per visibility; sentinel bins are left out."""
    rates = summary.config.rates
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(rates), figsize=(3.2 * len(rates), 2.8), squeeze=False)
        for ax, rate in zip(axes[0], rates):
            for v in summary.config.visibilities:
                hist = summary[(rate, v)].histogram
                keys = sorted(i for i in hist.bins if hist.center(i) > -1.0)
                ax.plot([hist.center(i) for i in keys], [hist.bins[i] for i in keys],
                        drawstyle="steps-mid", label=f"V = {v:g}")
            ax.axvline(0.0, color="0.6", lw=0.6, ls=":")
            ax.set_xlabel(RATE_LABELS[rate])
            ax.set_ylabel("samples per bin")
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_windows(records, path, xlabel="window"):
    """S_max, C_max and the key rates per window or run."""
    xs = [r.window_index for r in records]
    with plt.rc_context(_STYLE):
        fig, (ax_s, ax_c, ax_r) = plt.subplots(3, 1, figsize=(5.5, 7.0), sharex=True)
        ax_s.plot(xs, [r.s_max for r in records], "o-", ms=3)
        ax_s.axhline(2.0, color="0.6", lw=0.6, ls="--")
        ax_s.set_ylabel(r"$S_{max}$")
        ax_c.plot(xs, [r.c_max for r in records], "o-", ms=3)
        ax_c.set_ylabel(r"$C_{max}$")
        for key, label in RATE_LABELS.items():
            ys = [max(r.report.rates()[key], 0.0) for r in records]
            ax_r.plot(xs, ys, "o-", ms=3, label=label)
        ax_r.set_ylabel("key rate (negative shown as 0)")
        ax_r.set_xlabel(xlabel)
        ax_r.legend(frameon=False, ncol=3)
        fig.tight_layout()
        _save(fig, path)
