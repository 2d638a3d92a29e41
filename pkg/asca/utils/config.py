from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from ..errors import ConfigError
from .time import CAPPED, RATIOS


class Config:
    """A JSON document on disk with atomic writes.

    Pipeline configs are loaded through it and each run stores the resolved
    config next to its outputs with it.
    """

    def __init__(self, name, *, missing_ok=True):
        self.name = os.fspath(name)
        self.lock = threading.Lock()
        self.missing_ok = missing_ok
        self.load_from_file()

    def load_from_file(self):
        try:
            with open(self.name, 'r', encoding='utf-8') as f:
                self._db = json.load(f)
        except FileNotFoundError:
            if not self.missing_ok:
                raise ConfigError(f'config file {self.name!r} does not exist') from None
            self._db = {}
        except json.JSONDecodeError as e:
            raise ConfigError(f'{self.name}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}') from None

        if not isinstance(self._db, dict):
            raise ConfigError(f'{self.name}: the top level must be a JSON object')

    def _dump(self):
        directory, base = os.path.split(os.path.abspath(self.name))
        temp = os.path.join(directory, '%s-%s.tmp' % (uuid.uuid4(), base))
        with open(temp, 'w', encoding='utf-8') as tmp:
            json.dump(self._db.copy(), tmp, ensure_ascii=True, indent=2, sort_keys=True)
            tmp.write('\n')

        # atomically move the file
        os.replace(temp, self.name)

    def save(self):
        with self.lock:
            self._dump()

    def get(self, key, *args):
        """Retrieves a config entry."""
        return self._db.get(str(key), *args)

    def update(self, entries):
        """Edits several entries with a single write."""
        for key, value in entries.items():
            self._db[str(key)] = value
        self.save()

    def __contains__(self, item):
        return str(item) in self._db

    def __getitem__(self, item):
        return self._db[str(item)]

    def all(self):
        return self._db

    def digest(self):
        """sha256 of the canonical JSON form; key order and whitespace do not matter."""
        canonical = json.dumps(self._db, sort_keys=True, separators=(',', ':'), ensure_ascii=True)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def default_cardinality(frequency, period, step=1) -> Optional[int]:
    pair = (frequency, period)
    if pair in RATIOS and RATIOS[pair] % step == 0:
        return RATIOS[pair] // step
    if pair in CAPPED:
        return 365 // CAPPED[pair]
    return None


@dataclass(frozen=True)
class ModeDecl:
    name: str
    kind: str = 'cyclostationary'
    frequency: str = ''
    period: str = ''
    cardinality: Optional[int] = None
    step: int = 1
    origin: int = 0
    labels: Tuple[str, ...] = ()

    def resolved_cardinality(self) -> Optional[int]:
        if self.cardinality is not None:
            return self.cardinality
        if self.labels:
            return len(self.labels)
        if self.kind == 'non_temporal':
            return 1
        return default_cardinality(self.frequency, self.period, self.step)


@dataclass(frozen=True)
class AggregateDecl:
    mode: str
    block: int
    absorb_remainder: bool = False
    name: Optional[str] = None


@dataclass(frozen=True)
class FactorDecl:
    mode: str
    kind: str = 'nominal'
    nested_in: Optional[str] = None


@dataclass(frozen=True)
class PlotDecl:
    scores: bool = True
    loadings: bool = True
    biplot: bool = True
    diagnostics: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    """The typed view of a pipeline config document.

    Paths are resolved against the directory of the config file.
    """

    input: str
    seed: int
    modes: Tuple[ModeDecl, ...] = ()
    rows: Tuple[str, ...] = ()
    columns: Tuple[str, ...] = ()
    factors: Tuple[FactorDecl, ...] = ()
    interactions: Tuple[Tuple[str, ...], ...] = ()
    year_start: int = 1
    series_mode: Optional[str] = None
    aggregate: Tuple[AggregateDecl, ...] = ()
    missing_threshold: float = math.inf
    preprocessing: str = 'center'
    permutations: int = 999
    reference: str = 'residuals'
    components: int = 2
    output: str = 'output'
    plots: PlotDecl = field(default_factory=PlotDecl)
    null_distribution: bool = False
    n_jobs: int = 1
    chunk_size: Optional[int] = None
    acf_lags: int = 20
    percentile: float = 99.0
    univariate: bool = False
    digest: str = ''
    raw: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)


def _as_tuple(value):
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


def _build(cls, entry, where):
    if isinstance(entry, str):
        return cls(entry)
    if not isinstance(entry, dict):
        raise ConfigError(f'{where}: expected an object, got {type(entry).__name__}')
    try:
        return cls(**entry)
    except TypeError as e:
        raise ConfigError(f'{where}: {e}') from None


def pipeline_config(config: Config) -> PipelineConfig:
    """Builds a :class:`PipelineConfig` from a loaded document.

    Only the structure is checked here; :func:`asca.utils.checks.validate`
    reports the semantic problems.
    """
    base = os.path.dirname(os.path.abspath(config.name))
    for key in ('input', 'seed'):
        if key not in config:
            raise ConfigError(f'{key}: required')

    unfold = config.get('unfold', {})
    if not isinstance(unfold, dict):
        raise ConfigError('unfold: expected an object with rows and columns')

    modes = tuple(
        _build(ModeDecl, dict(m, labels=tuple(m.get('labels', ()))) if isinstance(m, dict) else m, f'modes[{i}]')
        for i, m in enumerate(config.get('modes', []))
    )
    aggregate = tuple(_build(AggregateDecl, a, f'aggregate[{i}]') for i, a in enumerate(config.get('aggregate', [])))
    factors = tuple(_build(FactorDecl, f, f'factors[{i}]') for i, f in enumerate(config.get('factors', [])))
    plots = config.get('plots', {})
    if isinstance(plots, bool):
        plots = PlotDecl(plots, plots, plots, plots)
    else:
        plots = _build(PlotDecl, plots, 'plots')

    threshold = config.get('missing_threshold')
    options = {
        key: config[key]
        for key in ('year_start', 'series_mode', 'preprocessing', 'permutations', 'reference', 'components',
                    'null_distribution', 'n_jobs', 'chunk_size', 'acf_lags', 'percentile', 'univariate')
        if key in config
    }
    return PipelineConfig(
        input=os.path.join(base, str(config['input'])),
        seed=config['seed'],
        modes=modes,
        rows=_as_tuple(unfold.get('rows')),
        columns=_as_tuple(unfold.get('columns')),
        factors=factors,
        interactions=tuple(_as_tuple(i) for i in config.get('interactions', [])),
        aggregate=aggregate,
        missing_threshold=math.inf if threshold is None else threshold,
        output=os.path.join(base, str(config.get('output', 'output'))),
        plots=plots,
        digest=config.digest(),
        raw=dict(config.all()),
        **options,
    )


def load_config(path) -> PipelineConfig:
    return pipeline_config(Config(path, missing_ok=False))
