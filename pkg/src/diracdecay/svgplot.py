"""Minimal deterministic SVG plotting (no plotting dependency).

Only what the CLI needs: line / point / cell series on linear axes, with a
provenance comment embedded in the file.  Output is byte-deterministic for
identical inputs.
"""

from __future__ import annotations

import math

PALETTE = ("#1f6fb4", "#d95f02", "#2ca05a", "#7570b3", "#c23b80", "#666666")


def _fmt(x):
    return "%.6g" % x


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


def svg_plot(stream, series, title="", xlabel="", ylabel="", width=640, height=440,
             comment=None):
    """Write an SVG chart.

    series: list of dicts with keys kind ("line" | "points" | "cells"),
    x, y (sequences), optional label, color, and for cells a value->color
    mapping already applied (color per cell via 'colors').
    """
    close = False
    if isinstance(stream, str):
        stream = open(stream, "w", newline="")
        close = True
    try:
        ml, mr, mt, mb = 62, 16, 34, 46
        pw, ph = width - ml - mr, height - mt - mb
        xs = [float(v) for srs in series for v in srs["x"]]
        ys = [float(v) for srs in series for v in srs["y"]]
        if not xs:
            xs, ys = [0.0, 1.0], [0.0, 1.0]
        xlo, xhi = min(xs), max(xs)
        ylo, yhi = min(ys), max(ys)
        if xhi == xlo:
            xhi = xlo + 1.0
        if yhi == ylo:
            yhi = ylo + 1.0
        padx = 0.04 * (xhi - xlo)
        pady = 0.06 * (yhi - ylo)
        xlo, xhi = xlo - padx, xhi + padx
        ylo, yhi = ylo - pady, yhi + pady

        def X(v):
            return ml + (float(v) - xlo) / (xhi - xlo) * pw

        def Y(v):
            return mt + ph - (float(v) - ylo) / (yhi - ylo) * ph

        w = stream.write
        w('<?xml version="1.0" encoding="UTF-8"?>\n')
        w(
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
            'viewBox="0 0 %d %d">\n' % (width, height, width, height)
        )
        if comment:
            w("<!-- %s -->\n" % comment.replace("--", "- -"))
        w('<rect width="%d" height="%d" fill="white"/>\n' % (width, height))
        # axes + ticks
        w(
            '<g stroke="#222" stroke-width="1" fill="none">'
            '<path d="M %s %s H %s"/><path d="M %s %s V %s"/></g>\n'
            % (_fmt(ml), _fmt(mt + ph), _fmt(ml + pw), _fmt(ml), _fmt(mt), _fmt(mt + ph))
        )
        w('<g font-family="sans-serif" font-size="11" fill="#222">\n')
        for t in _ticks(xlo + padx, xhi - padx):
            w(
                '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222"/>'
                '<text x="%s" y="%s" text-anchor="middle">%s</text>\n'
                % (_fmt(X(t)), _fmt(mt + ph), _fmt(X(t)), _fmt(mt + ph + 4),
                   _fmt(X(t)), _fmt(mt + ph + 17), _fmt(t))
            )
        for t in _ticks(ylo + pady, yhi - pady):
            w(
                '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222"/>'
                '<text x="%s" y="%s" text-anchor="end">%s</text>\n'
                % (_fmt(ml - 4), _fmt(Y(t)), _fmt(ml), _fmt(Y(t)),
                   _fmt(ml - 7), _fmt(Y(t) + 4), _fmt(t))
            )
        if title:
            w(
                '<text x="%s" y="20" text-anchor="middle" font-size="14">%s</text>\n'
                % (_fmt(ml + pw / 2), title)
            )
        if xlabel:
            w(
                '<text x="%s" y="%s" text-anchor="middle">%s</text>\n'
                % (_fmt(ml + pw / 2), _fmt(height - 10), xlabel)
            )
        if ylabel:
            w(
                '<text x="14" y="%s" text-anchor="middle" '
                'transform="rotate(-90 14 %s)">%s</text>\n'
                % (_fmt(mt + ph / 2), _fmt(mt + ph / 2), ylabel)
            )
        w("</g>\n")
        legend_y = mt + 6
        for i, srs in enumerate(series):
            color = srs.get("color", PALETTE[i % len(PALETTE)])
            kind = srs.get("kind", "line")
            if kind == "cells":
                colors = srs["colors"]
                cw = srs.get("cell_w", 6.0)
                ch = srs.get("cell_h", 6.0)
                for xv, yv, cv in zip(srs["x"], srs["y"], colors):
                    w(
                        '<rect x="%s" y="%s" width="%s" height="%s" fill="%s"/>\n'
                        % (_fmt(X(xv) - cw / 2), _fmt(Y(yv) - ch / 2),
                           _fmt(cw), _fmt(ch), cv)
                    )
            elif kind == "points":
                for xv, yv in zip(srs["x"], srs["y"]):
                    w(
                        '<circle cx="%s" cy="%s" r="2.6" fill="%s"/>\n'
                        % (_fmt(X(xv)), _fmt(Y(yv)), color)
                    )
            else:
                pts = " ".join(
                    "%s,%s" % (_fmt(X(xv)), _fmt(Y(yv)))
                    for xv, yv in zip(srs["x"], srs["y"])
                )
                w(
                    '<polyline points="%s" fill="none" stroke="%s" '
                    'stroke-width="1.6"/>\n' % (pts, color)
                )
            if srs.get("label"):
                w(
                    '<rect x="%s" y="%s" width="10" height="10" fill="%s"/>'
                    '<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                    'fill="#222">%s</text>\n'
                    % (_fmt(ml + pw - 130), _fmt(legend_y), color,
                       _fmt(ml + pw - 115), _fmt(legend_y + 9), srs["label"])
                )
                legend_y += 16
        w("</svg>\n")
    finally:
        if close:
            stream.close()
