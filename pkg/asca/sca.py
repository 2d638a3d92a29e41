"""Principal component views of effect matrices."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import ComponentOutOfRange, RTooLarge, ShapeMismatch, ZeroMatrixWarning

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScaView:
    term: str
    loadings: np.ndarray
    singular_values: np.ndarray
    scores_effect: np.ndarray
    explained_fraction: np.ndarray
    effect: np.ndarray
    scores_augmented: Optional[np.ndarray] = None
    row_labels: Tuple[str, ...] = ()
    col_labels: Tuple[str, ...] = ()

    @property
    def n_components(self):
        return self.loadings.shape[1]

    @property
    def scores(self):
        """Augmented scores when available, the plotting default."""
        return self.scores_effect if self.scores_augmented is None else self.scores_augmented

    def component_names(self):
        return [f'PC{r + 1}' for r in range(self.n_components)]

    def scores_frame(self):
        frame = pd.DataFrame(self.scores_effect, columns=self.component_names())
        if self.scores_augmented is not None:
            augmented = pd.DataFrame(self.scores_augmented,
                                     columns=[f'{c}_augmented' for c in self.component_names()])
            frame = pd.concat([frame, augmented], axis=1)
        frame.insert(0, 'row', list(self.row_labels) or list(range(len(frame))))
        return frame

    def loadings_frame(self):
        frame = pd.DataFrame(self.loadings, columns=self.component_names())
        frame.insert(0, 'variable', list(self.col_labels) or list(range(len(frame))))
        return frame


def _fix_signs(loadings):
    """Flips each column so that its entry of largest magnitude is positive."""
    if loadings.size == 0:
        return np.ones(loadings.shape[1])
    pivots = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[pivots, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def pca_effect(effect, n_components, *, term='', row_labels=(), col_labels=()) -> ScaView:
    """Truncated SVD of ``effect``: loadings, singular values and effect scores.

    A zero matrix gives an empty view (no components) and a
    :class:`ZeroMatrixWarning`.
    """
    effect = np.asarray(effect, dtype=float)
    if effect.ndim != 2:
        raise ShapeMismatch(f'expected a matrix, got shape {effect.shape}')
    n, m = effect.shape
    limit = min(n, m)
    if not 1 <= n_components <= limit:
        raise RTooLarge(f'{n_components} components requested for a {n} x {m} matrix (at most {limit})')

    _, s, vt = scipy.linalg.svd(effect, full_matrices=False)
    total = float(np.sum(s ** 2))
    tol = s[0] * max(n, m) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.count_nonzero(s > tol)) if total > 0 else 0

    if rank == 0:
        message = f'effect matrix of {term or "term"} is zero; no components'
        warnings.warn(message, ZeroMatrixWarning, stacklevel=2)
        log.warning(message)
        empty = np.zeros((m, 0))
        return ScaView(term, empty, np.zeros(0), np.zeros((n, 0)), np.zeros(0), effect,
                       row_labels=tuple(row_labels), col_labels=tuple(col_labels))

    r = n_components
    loadings = vt[:r].T.copy()
    loadings *= _fix_signs(loadings)
    scores = effect @ loadings
    explained = s[:r] ** 2 / total
    log.debug('Term %r: %d components explain %.4f of the effect SS.', term, r, explained.sum())
    return ScaView(term, loadings, s[:r].copy(), scores, explained, effect,
                   row_labels=tuple(row_labels), col_labels=tuple(col_labels))


def augment_scores(view: ScaView, residuals) -> ScaView:
    """Adds ``(effect + residuals) @ loadings`` as the augmented scores."""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != view.effect.shape:
        raise ShapeMismatch(f'residuals of shape {residuals.shape} do not match the effect {view.effect.shape}')
    return replace(view, scores_augmented=(view.effect + residuals) @ view.loadings)


@dataclass(frozen=True)
class BiplotCoords:
    scores: np.ndarray
    score_labels: Tuple[str, ...]
    loadings: np.ndarray
    loading_labels: Tuple[str, ...]
    scale: float
    pc_x: int
    pc_y: Optional[int]


def biplot_coords(view: ScaView, pc_x=0, pc_y: Optional[int] = 1, *, groups: Optional[Sequence] = None,
                  augmented=False) -> BiplotCoords:
    """Score and loading points on components ``pc_x`` and ``pc_y`` (0-based).

    Loadings are multiplied by ``max|score| / max|loading|`` over the chosen
    components so both clouds span the same range. ``pc_y=None`` gives a
    one-dimensional plot with all points on the horizontal axis. With
    ``groups`` the scores are averaged per group, one point per level in
    order of first appearance.
    """
    for pc in (pc_x, pc_y):
        if pc is not None and not 0 <= pc < view.n_components:
            raise ComponentOutOfRange(f'component {pc} is not in a view with {view.n_components} components')

    picked = [pc_x] if pc_y is None else [pc_x, pc_y]
    scores = (view.scores if augmented else view.scores_effect)[:, picked]
    labels = tuple(view.row_labels) or tuple(str(i) for i in range(scores.shape[0]))

    if groups is not None:
        groups = list(groups)
        if len(groups) != scores.shape[0]:
            raise ShapeMismatch(f'{len(groups)} group labels for {scores.shape[0]} score rows')
        order = list(dict.fromkeys(groups))
        index = {g: i for i, g in enumerate(order)}
        codes = np.array([index[g] for g in groups])
        sums = np.zeros((len(order), scores.shape[1]))
        np.add.at(sums, codes, scores)
        scores = sums / np.bincount(codes, minlength=len(order))[:, None]
        labels = tuple(str(g) for g in order)

    loadings = view.loadings[:, picked]
    max_loading = float(np.max(np.abs(loadings))) if loadings.size else 0.0
    max_score = float(np.max(np.abs(scores))) if scores.size else 0.0
    scale = max_score / max_loading if max_loading > 0 and max_score > 0 else 1.0

    if pc_y is None:
        scores = np.column_stack([scores[:, 0], np.zeros(scores.shape[0])])
        loadings = np.column_stack([loadings[:, 0], np.zeros(loadings.shape[0])])

    col_labels = tuple(view.col_labels) or tuple(str(j) for j in range(loadings.shape[0]))
    return BiplotCoords(scores, labels, loadings * scale, col_labels, scale, pc_x, pc_y)
