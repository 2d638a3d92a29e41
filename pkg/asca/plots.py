"""Static SVG figures: score, loading and biplots, MSPC charts, ACF stems and boxplots.

Output is a pure function of the data: fixed canvas size, text as SVG
``<text>`` elements and no timestamps, so the same run writes byte-identical
files. Markers carry their data coordinates in ``data-x``/``data-y``.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .diagnostics import BoxSummary, MspcChart
from .sca import BiplotCoords, ScaView, biplot_coords
from .utils.formats import slugify

log = logging.getLogger(__name__)

WIDTH = 640
HEIGHT = 480
MARGIN = 64
FONT = 'font-family="DejaVu Sans, sans-serif" font-size="12"'

SCORE_COLOUR = '#1f77b4'
LOADING_COLOUR = '#d62728'
LIMIT_COLOUR = '#7f7f7f'


def _num(value):
    return f'{value:.2f}'


def _data(value):
    return f'{value:.12g}'


def _padded_range(values, pad=0.05):
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if values.size == 0:
        return -1.0, 1.0
    low, high = float(values.min()), float(values.max())
    if low == high:
        span = abs(low) or 1.0
        return low - span, high + span
    extra = (high - low) * pad
    return low - extra, high + extra


class SvgCanvas:
    def __init__(self, title='', width=WIDTH, height=HEIGHT):
        self.width = width
        self.height = height
        self.title = title
        self.metadata: Dict[str, str] = {}
        self.commands: List[str] = []
        self.x_range = (-1.0, 1.0)
        self.y_range = (-1.0, 1.0)

    # data -> pixels

    def set_ranges(self, x_range, y_range):
        self.x_range = x_range
        self.y_range = y_range

    def px(self, x):
        low, high = self.x_range
        return MARGIN + (x - low) / (high - low) * (self.width - 2 * MARGIN)

    def py(self, y):
        low, high = self.y_range
        return self.height - MARGIN - (y - low) / (high - low) * (self.height - 2 * MARGIN)

    # primitives

    def line(self, x1, y1, x2, y2, stroke='#000000', extra=''):
        self.commands.append(
            f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" stroke="{stroke}" {extra}/>'
        )

    def polyline(self, points, stroke='#000000'):
        coords = ' '.join(f'{_num(x)},{_num(y)}' for x, y in points)
        self.commands.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}"/>')

    def rect(self, x, y, w, h, fill='none', stroke='#000000'):
        self.commands.append(
            f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def text(self, x, y, string, anchor='middle', extra=''):
        self.commands.append(
            f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}" {FONT} {extra}>{escape(str(string))}</text>'
        )

    def marker(self, x, y, css_class, colour, label=None, shape='circle'):
        """A marker at data coordinates ``(x, y)``."""
        cx, cy = self.px(x), self.py(y)
        attrs = f'class="{css_class}" data-x="{_data(x)}" data-y="{_data(y)}"'
        if label is not None:
            attrs += f' data-label={quoteattr(str(label))}'
        if shape == 'triangle':
            points = f'{_num(cx)},{_num(cy - 4)} {_num(cx - 4)},{_num(cy + 3)} {_num(cx + 4)},{_num(cy + 3)}'
            self.commands.append(f'<polygon points="{points}" fill="{colour}" {attrs}/>')
        else:
            self.commands.append(f'<circle cx="{_num(cx)}" cy="{_num(cy)}" r="3" fill="{colour}" {attrs}/>')

    # furniture

    def axes(self, x_label='', y_label='', zero_lines=False):
        self.rect(MARGIN, MARGIN, self.width - 2 * MARGIN, self.height - 2 * MARGIN)
        for value in self.x_range:
            self.text(self.px(value), self.height - MARGIN + 16, f'{value:.3g}')
        for value in self.y_range:
            self.text(MARGIN - 6, self.py(value) + 4, f'{value:.3g}', anchor='end')
        if zero_lines:
            if self.x_range[0] < 0 < self.x_range[1]:
                self.line(self.px(0), MARGIN, self.px(0), self.height - MARGIN, LIMIT_COLOUR, 'stroke-width="0.5"')
            if self.y_range[0] < 0 < self.y_range[1]:
                self.line(MARGIN, self.py(0), self.width - MARGIN, self.py(0), LIMIT_COLOUR, 'stroke-width="0.5"')
        if x_label:
            self.text(self.width / 2, self.height - MARGIN / 3, x_label)
        if y_label:
            x, y = MARGIN / 3, self.height / 2
            self.text(x, y, y_label, extra=f'transform="rotate(-90 {_num(x)} {_num(y)})"')
        if self.title:
            self.text(self.width / 2, MARGIN / 2, self.title)

    def render(self):
        head = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg version="1.1" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" xmlns="http://www.w3.org/2000/svg">',
        ]
        if self.metadata:
            items = ' '.join(f'{key}={quoteattr(value)}' for key, value in sorted(self.metadata.items()))
            head.append(f'<metadata><plot {items}/></metadata>')
        head.append(f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>')
        return '\n'.join(head + self.commands + ['</svg>']) + '\n'


def _component_label(view: ScaView, r):
    if r < view.explained_fraction.size:
        return f'PC{r + 1} ({100 * view.explained_fraction[r]:.1f}%)'
    return f'PC{r + 1}'


def score_plot(view: ScaView, *, augmented=True) -> str:
    """PC1 against PC2, or PC1 by row when the view has a single component."""
    canvas = SvgCanvas(f'Scores: {view.term}')
    scores = view.scores if augmented else view.scores_effect
    labels = list(view.row_labels) or [str(i) for i in range(scores.shape[0])]

    if view.n_components >= 2:
        xs, ys = scores[:, 0], scores[:, 1]
        x_label, y_label = _component_label(view, 0), _component_label(view, 1)
    elif view.n_components == 1:
        xs, ys = np.arange(scores.shape[0], dtype=float), scores[:, 0]
        x_label, y_label = 'row', _component_label(view, 0)
    else:
        xs = ys = np.zeros(0)
        x_label, y_label = 'PC1', 'PC2'

    canvas.set_ranges(_padded_range(xs), _padded_range(ys))
    canvas.axes(x_label, y_label, zero_lines=True)
    for x, y, label in zip(xs, ys, labels):
        canvas.marker(float(x), float(y), 'score', SCORE_COLOUR, label)
    return canvas.render()


def loading_plot(view: ScaView, component=0) -> str:
    """Loadings of one component against the variable index, as a line with markers."""
    canvas = SvgCanvas(f'Loadings: {view.term}')
    if component < view.n_components:
        values = view.loadings[:, component]
    else:
        values = np.zeros(0)
    xs = np.arange(values.size, dtype=float)
    canvas.set_ranges(_padded_range(xs), _padded_range(values))
    canvas.axes('variable', _component_label(view, component), zero_lines=True)
    if values.size:
        canvas.polyline([(canvas.px(x), canvas.py(y)) for x, y in zip(xs, values)], LOADING_COLOUR)
    labels = list(view.col_labels) or [str(j) for j in range(values.size)]
    for x, y, label in zip(xs, values, labels):
        canvas.marker(float(x), float(y), 'loading', LOADING_COLOUR, label)
    return canvas.render()


def biplot(coords: BiplotCoords, term='') -> str:
    canvas = SvgCanvas(f'Biplot: {term}' if term else 'Biplot')
    canvas.metadata['scale'] = _data(coords.scale)
    canvas.metadata['pc_x'] = str(coords.pc_x + 1)
    canvas.metadata['pc_y'] = '' if coords.pc_y is None else str(coords.pc_y + 1)

    xs = np.concatenate([coords.scores[:, 0], coords.loadings[:, 0]])
    ys = np.concatenate([coords.scores[:, 1], coords.loadings[:, 1]])
    canvas.set_ranges(_padded_range(xs), _padded_range(ys))
    y_label = '' if coords.pc_y is None else f'PC{coords.pc_y + 1}'
    canvas.axes(f'PC{coords.pc_x + 1}', y_label, zero_lines=True)
    for (x, y), label in zip(coords.scores, coords.score_labels):
        canvas.marker(float(x), float(y), 'score', SCORE_COLOUR, label)
    for (x, y), label in zip(coords.loadings, coords.loading_labels):
        canvas.marker(float(x), float(y), 'loading', LOADING_COLOUR, label, shape='triangle')
    return canvas.render()


def mspc_plot(chart: MspcChart, labels: Sequence[str] = ()) -> str:
    """D statistic against Q statistic with both control limits."""
    canvas = SvgCanvas(f'MSPC (percentile {chart.percentile:g})')
    canvas.metadata['q_limit'] = _data(chart.q_limit)
    canvas.metadata['d_limit'] = _data(chart.d_limit)
    canvas.set_ranges(
        _padded_range(np.append(chart.d, [0.0, chart.d_limit])),
        _padded_range(np.append(chart.q, [0.0, chart.q_limit])),
    )
    canvas.axes('D statistic', 'Q statistic')
    dash = 'stroke-dasharray="4 3"'
    canvas.line(canvas.px(chart.d_limit), MARGIN, canvas.px(chart.d_limit), HEIGHT - MARGIN, LIMIT_COLOUR, dash)
    canvas.line(MARGIN, canvas.py(chart.q_limit), WIDTH - MARGIN, canvas.py(chart.q_limit), LIMIT_COLOUR, dash)
    labels = list(labels) or [str(i) for i in range(chart.q.size)]
    for d, q, label in zip(chart.d, chart.q, labels):
        canvas.marker(float(d), float(q), 'observation', SCORE_COLOUR, label)
    return canvas.render()


def acf_plot(acf, n_observations=None) -> str:
    """Stem plot of the sample ACF; with ``n_observations`` the +-1.96/sqrt(N) band is drawn."""
    acf = np.asarray(acf, dtype=float)
    canvas = SvgCanvas('Sample ACF of the Q statistic')
    lags = np.arange(acf.size, dtype=float)
    canvas.set_ranges(_padded_range(np.append(lags, [-0.5, acf.size - 0.5])), (-1.05, 1.05))
    canvas.axes('lag', 'autocorrelation', zero_lines=True)
    if n_observations:
        band = 1.96 / np.sqrt(n_observations)
        for value in (band, -band):
            y = canvas.py(value)
            canvas.line(MARGIN, y, WIDTH - MARGIN, y, LIMIT_COLOUR, 'stroke-dasharray="4 3"')
    for lag, value in zip(lags, acf):
        canvas.line(canvas.px(lag), canvas.py(0.0), canvas.px(lag), canvas.py(value), SCORE_COLOUR)
        canvas.marker(float(lag), float(value), 'lag', SCORE_COLOUR)
    return canvas.render()


def box_plot(boxes: Dict[str, BoxSummary], title='Residuals by level') -> str:
    canvas = SvgCanvas(title)
    summaries = list(boxes.values())
    values = [v for b in summaries for v in (b.whisker_low, b.whisker_high, *b.outliers)]
    canvas.set_ranges((-0.5, max(len(summaries), 1) - 0.5), _padded_range(values))
    canvas.axes('', 'residual')
    half = 0.3
    for i, box in enumerate(summaries):
        x0, x1 = canvas.px(i - half), canvas.px(i + half)
        top, bottom = canvas.py(box.q3), canvas.py(box.q1)
        canvas.rect(x0, top, x1 - x0, bottom - top, '#c6dbef', SCORE_COLOUR)
        canvas.line(x0, canvas.py(box.median), x1, canvas.py(box.median), '#08306b', 'stroke-width="2"')
        canvas.line(canvas.px(i), top, canvas.px(i), canvas.py(box.whisker_high))
        canvas.line(canvas.px(i), bottom, canvas.px(i), canvas.py(box.whisker_low))
        for value in box.outliers:
            canvas.marker(float(i), value, 'outlier', LOADING_COLOUR)
        canvas.text(canvas.px(i), HEIGHT - MARGIN + 30, box.level)
    return canvas.render()


@dataclass
class PlotArtifacts:
    views: Dict[str, ScaView] = field(default_factory=dict)
    groups: Dict[str, List[str]] = field(default_factory=dict)
    chart: Optional[MspcChart] = None
    chart_labels: Sequence[str] = ()
    acf: Optional[np.ndarray] = None
    boxes: Dict[str, BoxSummary] = field(default_factory=dict)
    box_title: str = 'Residuals by level'


@dataclass(frozen=True)
class PlotToggles:
    scores: bool = True
    loadings: bool = True
    biplot: bool = True
    diagnostics: bool = True


def _write(directory, name, content, written):
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(content)
    written.append(path)


def emit_plots(artifacts: PlotArtifacts, directory, toggles: PlotToggles = PlotToggles()) -> List[str]:
    """Writes every enabled figure into ``directory`` and returns the paths."""
    os.makedirs(directory, exist_ok=True)
    written: List[str] = []

    for term, view in artifacts.views.items():
        slug = slugify(term)
        if toggles.scores:
            _write(directory, f'scores_{slug}.svg', score_plot(view), written)
        if toggles.loadings and view.n_components:
            _write(directory, f'loadings_{slug}.svg', loading_plot(view), written)
        if toggles.biplot and view.n_components:
            pc_y = 1 if view.n_components >= 2 else None
            coords = biplot_coords(view, 0, pc_y, groups=artifacts.groups.get(term))
            _write(directory, f'biplot_{slug}.svg', biplot(coords, term), written)

    if toggles.diagnostics:
        if artifacts.chart is not None:
            _write(directory, 'mspc.svg', mspc_plot(artifacts.chart, artifacts.chart_labels), written)
        if artifacts.acf is not None:
            n = artifacts.chart.q.size if artifacts.chart is not None else None
            _write(directory, 'acf.svg', acf_plot(artifacts.acf, n), written)
        if artifacts.boxes:
            _write(directory, 'residuals.svg', box_plot(artifacts.boxes, artifacts.box_title), written)

    log.info('Wrote %d plots to %s.', len(written), directory)
    return written


def iter_markers(svg: str, css_class: str) -> Iterable[tuple]:
    """``(x, y)`` data coordinates of the markers of ``css_class`` in an emitted figure."""
    pattern = re.compile(rf'class="{re.escape(css_class)}" data-x="([^"]+)" data-y="([^"]+)"')
    for match in pattern.finditer(svg):
        yield float(match.group(1)), float(match.group(2))
