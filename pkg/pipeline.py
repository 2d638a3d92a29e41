import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import pygit2

import asca
from asca import design as design_
from asca import diagnostics, factorization, inference, preprocess, sca
from asca import tensor as tensor_
from asca.context import MANIFEST, RunContext
from asca.errors import ConfigValidationError, ConstantSeries, SeriesTooShort
from asca.plots import PlotArtifacts, PlotToggles, emit_plots
from asca.utils import checks
from asca.utils.config import PipelineConfig, load_config
from asca.utils.formats import slugify

log = logging.getLogger(__name__)

description = """
Fits ASCA models to cyclostationary time series: the records are arranged
in a calendar tensor, unfolded, preprocessed, factorized by least squares
and tested by permutation, and every effect is projected with PCA.
"""

stages = (
    'load',
    'aggregate',
    'unfold',
    'preprocess',
    'design',
    'fit',
    'test',
    'project',
    'diagnose',
    'export',
)


def source_revision():
    """Short id of the checked out commit of this package, ``'none'`` outside a repository."""
    try:
        path = pygit2.discover_repository(os.path.dirname(os.path.abspath(__file__)))
        if path is None:
            return 'none'
        repo = pygit2.Repository(path)
        return repo[repo.head.target].short_id
    except (pygit2.GitError, KeyError, ValueError):
        return 'none'


def file_digest(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunState:
    tensor: Optional[tensor_.LabeledTensor] = None
    table: Optional[tensor_.DesignTable] = None
    report: Optional[preprocess.PreprocessReport] = None
    design: Optional[design_.DesignMatrix] = None
    decomposition: Optional[factorization.EffectDecomposition] = None
    tests: List[inference.PermutationResult] = field(default_factory=list)
    anova: Optional[factorization.AnovaTable] = None
    univariate: Optional[factorization.AnovaTable] = None
    views: Dict[str, sca.ScaView] = field(default_factory=dict)
    groups: Dict[str, List[str]] = field(default_factory=dict)
    chart: Optional[diagnostics.MspcChart] = None
    acf: Optional[np.ndarray] = None
    boxes: Dict[str, diagnostics.BoxSummary] = field(default_factory=dict)
    box_factor: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)


class Pipeline:
    """Runs the stages in order; each ``stage_<name>`` reads and extends :attr:`state`."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.state = RunState()

    @classmethod
    def from_file(cls, path):
        return cls(load_config(path))

    def validate(self) -> List[str]:
        return checks.validate(self.config)

    def run(self) -> RunState:
        violations = self.validate()
        if violations:
            raise ConfigValidationError(violations)

        with RunContext(self.config.output) as ctx:
            for name in stages:
                start = time.perf_counter()
                getattr(self, f'stage_{name}')(ctx)
                log.info('Stage %s finished in %.2fs.', name, time.perf_counter() - start)
            self.state.artifacts = list(ctx.written)
        return self.state

    # labels

    def row_labels(self):
        return [' / '.join(parts) for parts in self.state.table.row_names()]

    def col_labels(self):
        return [' / '.join(parts) for parts in self.state.table.col_names()]

    def level_names(self, mode_name):
        table = self.state.table
        spec = table.row_mode(mode_name)
        return [spec.level_name(i, table.year_start) for i in range(spec.cardinality)]

    def term_groups(self, members):
        """Level name of ``members`` for every row, joined for interactions."""
        per_member = []
        for member in members:
            factor = self.state.design.factor(member)
            per_member.append([factor.level_name(i) for i in factor.levels_per_observation])
        return [' x '.join(parts) for parts in zip(*per_member)]

    # stages

    def stage_load(self, ctx):
        cfg = self.config
        specs = [
            tensor_.CalendarModeSpec(
                m.name, m.frequency, m.period, m.resolved_cardinality(), m.kind, m.step, m.origin, m.labels
            )
            for m in cfg.modes
        ]
        records = tensor_.read_records(cfg.input)
        self.state.tensor = tensor_.build_tensor(records, specs, cfg.series_mode, year_start=cfg.year_start)

    def stage_aggregate(self, ctx):
        for directive in self.config.aggregate:
            self.state.tensor = tensor_.aggregate_mode(
                self.state.tensor, directive.mode, directive.block, directive.absorb_remainder, name=directive.name
            )

    def stage_unfold(self, ctx):
        cfg = self.config
        self.state.table = tensor_.unfold(self.state.tensor, cfg.rows, cfg.columns)
        log.info('Unfolded table has %d rows and %d columns.', *self.state.table.shape)

    def stage_preprocess(self, ctx):
        cfg = self.config
        self.state.table, self.state.report = preprocess.preprocess(
            self.state.table, cfg.missing_threshold, cfg.preprocessing
        )

    def factor_levels(self, name, decls, seen=()):
        """``(level per row, level names)`` of a factor.

        Row modes are crossed, so a nested factor's levels are the
        ``(outer, inner)`` pairs; every pair then sits under one outer level.
        """
        table = self.state.table
        levels = table.row_levels(name)
        names = self.level_names(name)
        outer = decls[name].nested_in
        if outer is None or outer in seen:
            return levels, names
        outer_levels, outer_names = self.factor_levels(outer, decls, seen + (name,))
        paired = outer_levels * len(names) + levels
        return paired, [f'{o} / {i}' for o in outer_names for i in names]

    def stage_design(self, ctx):
        table = self.state.table
        decls = {decl.mode: decl for decl in self.config.factors}
        factors = []
        for decl in self.config.factors:
            levels, names = self.factor_levels(decl.mode, decls)
            factors.append(design_.factor_from_labels(
                decl.mode, levels, len(names), decl.kind, decl.nested_in, names,
            ))
        self.state.design = design_.assemble_design(factors, self.config.interactions, table.shape[0])

    def stage_fit(self, ctx):
        self.state.decomposition = factorization.fit(self.state.table.matrix, self.state.design)

    def stage_test(self, ctx):
        cfg = self.config
        state = self.state
        options = dict(reference=cfg.reference, n_jobs=cfg.n_jobs, chunk_size=cfg.chunk_size)
        state.tests = inference.permutation_test(
            state.table.matrix, state.design, None, cfg.permutations, cfg.seed, **options
        )
        labels = {f.mode: f'{f.mode} (ordinal)' for f in cfg.factors if f.kind == design_.ORDINAL}
        state.anova = factorization.anova_table(state.decomposition, state.design, cfg.reference, state.tests,
                                                labels)
        log.info('ANOVA:\n%s', state.anova.render())

        if cfg.univariate:
            x = preprocess.row_means(state.table)
            state.univariate = factorization.univariate_anova(x, state.design, cfg.permutations, cfg.seed, **options)

    def stage_project(self, ctx):
        state = self.state
        n, m = state.table.shape
        rows, cols = self.row_labels(), self.col_labels()
        for term in state.design.terms:
            effect = state.decomposition.effect(term)
            # an effect has rank at most its degrees of freedom
            r = min(self.config.components, n, m, max(state.design.block(term).df, 1))
            view = sca.pca_effect(effect, r, term=term, row_labels=rows, col_labels=cols)
            if view.n_components:
                view = sca.augment_scores(view, state.decomposition.residuals)
            state.views[term] = view
            state.groups[term] = self.term_groups(state.design.block(term).members)

    def stage_diagnose(self, ctx):
        cfg = self.config
        state = self.state
        dec = state.decomposition
        fitted = dec.data - dec.residuals
        state.chart = diagnostics.mspc_chart(fitted, dec.residuals, cfg.components, cfg.percentile)

        lags = min(cfg.acf_lags, state.chart.q.size - 1)
        try:
            state.acf = diagnostics.sample_acf(state.chart.q, lags)
        except (ConstantSeries, SeriesTooShort) as e:
            log.warning('Skipping the Q-statistic ACF: %s', e)

        nominal = [f.mode for f in cfg.factors if f.kind == design_.NOMINAL]
        state.box_factor = (nominal or [f.mode for f in cfg.factors])[0]
        factor = state.design.factor(state.box_factor)
        groups = [factor.level_name(i) for i in factor.levels_per_observation]
        levels = [factor.level_name(i) for i in range(factor.n_levels)]
        state.boxes = diagnostics.residual_dispersion(dec.residuals, groups, levels)

    def stage_export(self, ctx: RunContext):
        cfg = self.config
        state = self.state

        ctx.write_frame('table.csv', state.anova.to_frame(), index=True)
        ctx.write_text('table.txt', state.anova.render())
        if state.univariate is not None:
            ctx.write_frame('table_univariate.csv', state.univariate.to_frame(), index=True)
            ctx.write_text('table_univariate.txt', state.univariate.render())
        ctx.write_text('preprocessing.txt', state.report.render())

        variables = factorization.variable_pct_ss(state.decomposition)
        ctx.write_frame('variables.csv', pd.DataFrame({'variable': self.col_labels(), '%SS': variables}))

        for term, view in state.views.items():
            slug = slugify(term)
            ctx.write_frame(f'scores_{slug}.csv', view.scores_frame())
            ctx.write_frame(f'loadings_{slug}.csv', view.loadings_frame())

        if cfg.null_distribution:
            frame = inference.null_distribution_frame(state.tests)
            for column in frame.columns:
                ctx.write_frame(f'null_{slugify(column)}.csv', frame[[column]], index=True)

        ctx.write_frame('mspc.csv', state.chart.to_frame(self.row_labels()))
        if state.acf is not None:
            ctx.write_frame('acf.csv', pd.DataFrame({'lag': np.arange(state.acf.size), 'acf': state.acf}))
        ctx.write_frame('residuals.csv', diagnostics.dispersion_frame(state.boxes))

        plots = cfg.plots
        if any((plots.scores, plots.loadings, plots.biplot, plots.diagnostics)):
            artifacts = PlotArtifacts(
                views=state.views,
                groups=state.groups,
                chart=state.chart,
                chart_labels=self.row_labels(),
                acf=state.acf,
                boxes=state.boxes,
                box_title=f'Residuals by {state.box_factor}',
            )
            toggles = PlotToggles(plots.scores, plots.loadings, plots.biplot, plots.diagnostics)
            for path in emit_plots(artifacts, ctx.path('plots'), toggles):
                ctx.written.append(os.path.relpath(path, ctx.staging))

        ctx.write_config('config.json', cfg.raw)
        ctx.write_text(MANIFEST, ctx.entry_to_text(self.manifest()))

    def manifest(self):
        cfg = self.config
        return [
            ('version', asca.__version__),
            ('revision', source_revision()),
            ('config_sha256', cfg.digest),
            ('input_sha256', file_digest(cfg.input)),
            ('seed', cfg.seed),
            ('permutations', cfg.permutations),
            ('rng', inference.RNG_ALGORITHM),
            ('reference', cfg.reference),
            ('preprocessing', cfg.preprocessing),
            ('rows', self.state.table.shape[0]),
            ('columns', self.state.table.shape[1]),
        ]
