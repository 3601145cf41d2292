#!/usr/bin/env python
# -*- coding: utf-8 -*-

# models.plot.py
"""
Plots of exported CSV files: minimal hand-written SVG documents and standalone bokeh HTML
"""
# Copyright (c) 2024 The BINN developers
# This file is part of BINN, released under a BSD license.
#    See the file LICENSE included with this distribution

import logging
import re
from os.path import basename, splitext
from xml.sax.saxutils import escape
import numpy as np
from bokeh.embed import file_html
from bokeh.models import ColumnDataSource, Legend
from bokeh.palettes import Colorblind8 as palette
from bokeh.plotting import figure
from bokeh.resources import CDN
from binn.tools.utilities import read_csv


logger = logging.getLogger(__name__)

DEFAULT_TOOLS = "pan,box_zoom,crosshair,reset,save"
SVG_WIDTH, SVG_HEIGHT, SVG_MARGIN = 640, 400, 50
UUID_PATTERN = re.compile(r"[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}")
MODEL_ID_PATTERN = re.compile(r'"id":\s*"(p?\d+)"')
QUOTED_ID_PATTERN = re.compile(r'"(p?\d+)"')


def _finite_bounds(values):
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if not values.size:
        return 0., 1.
    low, high = float(values.min()), float(values.max())
    if low == high:
        low, high = low - 0.5, high + 0.5
    return low, high


def svg_plot(x, series, title='', x_label='', y_label='', markers=False):
    """
    :param x: shared x values
    :param series: y values keyed by legend label, in drawing order
    :type series: dict
    :param markers: draw points instead of polylines
    :return: SVG document
    :rtype: str
    """
    x = np.asarray(x, dtype=np.float64)
    x_low, x_high = _finite_bounds(x)
    y_low, y_high = _finite_bounds(np.concatenate([np.asarray(y, dtype=np.float64).reshape(-1)
                                                   for y in series.values()]) if series else [])
    width, height = SVG_WIDTH - 2 * SVG_MARGIN, SVG_HEIGHT - 2 * SVG_MARGIN

    def to_px(xv, yv):
        return (SVG_MARGIN + (xv - x_low) / (x_high - x_low) * width,
                SVG_MARGIN + (1. - (yv - y_low) / (y_high - y_low)) * height)

    lines = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" viewBox="0 0 %d %d">' %
             (SVG_WIDTH, SVG_HEIGHT, SVG_WIDTH, SVG_HEIGHT),
             '<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="black"/>' %
             (SVG_MARGIN, SVG_MARGIN, width, height),
             '<text x="%d" y="%d" font-size="14" text-anchor="middle">%s</text>' %
             (SVG_WIDTH // 2, SVG_MARGIN // 2, escape(title)),
             '<text x="%d" y="%d" font-size="12" text-anchor="middle">%s</text>' %
             (SVG_WIDTH // 2, SVG_HEIGHT - 10, escape(x_label)),
             '<text x="15" y="%d" font-size="12" text-anchor="middle" transform="rotate(-90 15 %d)">%s</text>' %
             (SVG_HEIGHT // 2, SVG_HEIGHT // 2, escape(y_label)),
             '<text x="%d" y="%d" font-size="10">%.4g</text>' % (SVG_MARGIN, SVG_HEIGHT - SVG_MARGIN + 14, x_low),
             '<text x="%d" y="%d" font-size="10" text-anchor="end">%.4g</text>' %
             (SVG_WIDTH - SVG_MARGIN, SVG_HEIGHT - SVG_MARGIN + 14, x_high),
             '<text x="%d" y="%d" font-size="10" text-anchor="end">%.4g</text>' %
             (SVG_MARGIN - 4, SVG_MARGIN + 4, y_high),
             '<text x="%d" y="%d" font-size="10" text-anchor="end">%.4g</text>' %
             (SVG_MARGIN - 4, SVG_HEIGHT - SVG_MARGIN, y_low)]

    for i, (label, y) in enumerate(series.items()):
        color = palette[i % len(palette)]
        y = np.asarray(y, dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y)
        points = [to_px(xv, yv) for xv, yv in zip(x[keep], y[keep])]
        if markers:
            lines.extend('<circle cx="%.2f" cy="%.2f" r="2" fill="%s"/>' % (px, py, color) for px, py in points)
        elif points:
            lines.append('<polyline fill="none" stroke="%s" stroke-width="1.5" points="%s"/>' %
                         (color, ' '.join('%.2f,%.2f' % p for p in points)))
        lines.append('<text x="%d" y="%d" font-size="11" fill="%s">%s</text>' %
                     (SVG_WIDTH - SVG_MARGIN + 4, SVG_MARGIN + 14 * (i + 1), color, escape(str(label))))
    lines.append('</svg>')
    return '\n'.join(lines) + '\n'


def bokeh_plot(x, series, title='', x_label='', y_label='', markers=False):
    """
    Same content as svg_plot, as a bokeh figure
    """
    fig = figure(title=title, x_axis_label=x_label, y_axis_label=y_label, tools=DEFAULT_TOOLS)
    items = []
    for i, (label, y) in enumerate(series.items()):
        source = ColumnDataSource(data={'x': np.asarray(x, dtype=np.float64), 'y': np.asarray(y, dtype=np.float64)})
        color = palette[i % len(palette)]
        if markers:
            renderer = fig.scatter('x', 'y', source=source, color=color, size=4)
        else:
            renderer = fig.line('x', 'y', source=source, color=color, line_width=2)
        items.append((str(label), [renderer]))
    if items:
        fig.add_layout(Legend(items=items, location='center'), 'right')
    return fig


def stable_html_ids(html_str):
    """
    Renumber the bokeh model ids (a per-process counter) and the random document and element uuids in order of
    first appearance, so the same figure always renders to the same bytes
    """
    uuids = {}
    for token in UUID_PATTERN.findall(html_str):
        uuids.setdefault(token, '00000000-0000-4000-8000-%012d' % (len(uuids) + 1))
    model_ids = {}
    for token in MODEL_ID_PATTERN.findall(html_str):
        model_ids.setdefault(token, 'p%d' % (1000 + len(model_ids)))

    def replace_uuid(match):
        return uuids[match.group(0)]

    def replace_model_id(match):
        return '"%s"' % model_ids.get(match.group(1), match.group(1))

    return QUOTED_ID_PATTERN.sub(replace_model_id, UUID_PATTERN.sub(replace_uuid, html_str))


def write_plots(base_path, x, series, title='', x_label='', y_label='', markers=False):
    """
    Write base_path.svg and base_path.html
    :return: the two paths
    """
    svg_path, html_path = base_path + '.svg', base_path + '.html'
    with open(svg_path, 'w') as document:
        document.write(svg_plot(x, series, title=title, x_label=x_label, y_label=y_label, markers=markers))
    html_str = file_html(bokeh_plot(x, series, title=title, x_label=x_label, y_label=y_label, markers=markers),
                         CDN, title or basename(base_path))
    with open(html_path, 'w') as document:
        document.write(stable_html_ids(html_str))
    logger.debug("Plots written to %s and %s", svg_path, html_path)
    return svg_path, html_path


def plot_csv(csv_path, x_column, y_columns=None, title=None, markers=False):
    """
    Plot columns of an exported CSV next to it
    :param y_columns: columns to draw, every other column by default
    """
    table = read_csv(csv_path, required_columns=[x_column] + list(y_columns or []))
    y_columns = y_columns or [c for c in table.columns if c != x_column]
    base_path = splitext(csv_path)[0]
    series = {c: table[c].to_numpy(dtype=np.float64) for c in y_columns}
    return write_plots(base_path, table[x_column].to_numpy(dtype=np.float64), series,
                       title=title or basename(base_path), x_label=x_column,
                       y_label=y_columns[0] if len(y_columns) == 1 else '', markers=markers)


def plot_sweep_csv(csv_path, title=None):
    """
    Bifurcation diagram: stable and unstable equilibria as separate point series
    """
    table = read_csv(csv_path, required_columns=['sweep_value', 'equilibrium', 'stable'])
    stable = table['stable'].astype(bool).to_numpy()
    x = table['sweep_value'].to_numpy(dtype=np.float64)
    y = table['equilibrium'].to_numpy(dtype=np.float64)
    series = {'stable': np.where(stable, y, np.nan), 'unstable': np.where(stable, np.nan, y)}
    base_path = splitext(csv_path)[0]
    return write_plots(base_path, x, series, title=title or basename(base_path), x_label='sweep value',
                       y_label='equilibrium', markers=True)
