"""Byte-stable SVG renderings of result tables."""

from __future__ import annotations

import io
import warnings
from xml.sax.saxutils import escape

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import FuncFormatter  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "svg.hashsalt": "delaybif",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 9,
}


def _fmt(v, _pos=None):
    # shortest round-trip representation, with integers kept short
    return repr(float(v)) if v != int(v) else str(int(v))


def placeholder_svg(message="no data"):
    """A one-element SVG carrying a warning annotation."""
    return ('<svg xmlns="http://www.w3.org/2000/svg" width="320" height="40">'
            f'<text x="10" y="25" fill="#b00">{escape(message)}</text></svg>\n')


def emit_plot(table, style=None):
    """Render columns of ``table`` as an SVG document.

    Parameters
    ----------
    table : mapping of str to sequence
        Named columns of equal length.
    style : dict, optional
        ``x``: name of the abscissa column (default: first column);
        ``y``: list of ordinate columns (default: all others);
        ``kind``: ``"line"``, ``"scatter"`` or ``"envelope"`` (fill between
        the first two ``y`` columns); ``color_by``: column used for scatter
        colors; ``hline``: value of a marked horizontal line;
        ``title``, ``xlabel``, ``ylabel``.

    Returns
    -------
    str
        SVG text, identical for identical input.
    """
    style = dict(style or {})
    cols = list(table)
    if not cols or len(np.asarray(table[cols[0]])) == 0:
        warnings.warn("empty table, placeholder plot emitted", RuntimeWarning, stacklevel=2)
        return placeholder_svg("empty table: nothing to plot")
    xname = style.get("x", cols[0])
    ynames = style.get("y", [c for c in cols if c != xname and c != style.get("color_by")])
    kind = style.get("kind", "line")
    x = np.asarray(table[xname], dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        if kind == "envelope":
            lo = np.asarray(table[ynames[0]], dtype=float)
            hi = np.asarray(table[ynames[1]], dtype=float)
            ax.fill_between(x, lo, hi, color="0.85", lw=0)
            ax.plot(x, lo, "k-", lw=0.8, label=ynames[0])
            ax.plot(x, hi, "k-", lw=0.8, label=ynames[1])
        elif kind == "scatter":
            cb = style.get("color_by")
            for name in ynames:
                y = np.asarray(table[name], dtype=float)
                if cb:
                    ax.scatter(x, y, c=np.asarray(table[cb], dtype=float), s=4, cmap="viridis", label=name)
                else:
                    ax.scatter(x, y, s=4, label=name)
        else:
            for name in ynames:
                ax.plot(x, np.asarray(table[name], dtype=float), lw=0.8, label=name)
        if "hline" in style:
            ax.axhline(style["hline"], color="k", lw=0.6, ls="--")
        ax.xaxis.set_major_formatter(FuncFormatter(_fmt))
        ax.yaxis.set_major_formatter(FuncFormatter(_fmt))
        ax.set_xlabel(style.get("xlabel", xname))
        ax.set_ylabel(style.get("ylabel", ", ".join(ynames)))
        if "title" in style:
            ax.set_title(style["title"])
        if len(ynames) > 1 and kind != "envelope":
            ax.legend(fontsize=7)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return buf.getvalue()
