from __future__ import annotations

import logging
import os
import shutil
import uuid
from typing import Iterable, List, Optional, Tuple

from .errors import OutputConflict
from .utils.config import Config

log = logging.getLogger(__name__)

MANIFEST = 'manifest.txt'


def output_conflict(output) -> Optional[str]:
    """Why a run may not replace ``output``, or ``None`` when it may.

    Only a missing path, an empty directory or the directory of an earlier
    run (it holds a manifest) can be replaced.
    """
    output = os.fspath(output)
    if not os.path.exists(output):
        return None
    if not os.path.isdir(output):
        return f'{output!r} exists and is not a directory'
    if os.listdir(output) and not os.path.isfile(os.path.join(output, MANIFEST)):
        return f'{output!r} is not empty and holds no earlier run (no {MANIFEST})'
    return None


class RunContext:
    """Collects the artifacts of one run in a staging directory.

    Nothing appears at ``output`` until the block exits cleanly; then the
    staging directory replaces the output of an earlier run in one rename. On an
    exception the staging directory is removed and the previous output is
    left untouched.

    .. code-block:: python3

        with RunContext('results') as ctx:
            ctx.write_text('table.txt', text)
    """

    def __init__(self, output):
        self.output = os.path.abspath(os.fspath(output))
        parent, base = os.path.split(self.output)
        self.parent = parent
        self.staging = os.path.join(parent, f'.{base}-{uuid.uuid4().hex}.staging')
        self.written: List[str] = []

    def __enter__(self):
        conflict = output_conflict(self.output)
        if conflict is not None:
            raise OutputConflict(f'output: {conflict}')
        os.makedirs(self.staging)
        log.debug('Staging outputs in %s.', self.staging)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.staging, ignore_errors=True)
            log.info('Run failed; partial outputs removed.')
            return False
        self.publish()
        return False

    def __repr__(self):
        return f'<RunContext output={self.output!r}>'

    def path(self, name):
        path = os.path.join(self.staging, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def _track(self, name):
        self.written.append(name)
        return self.path(name)

    def write_text(self, name, text):
        with open(self._track(name), 'w', encoding='utf-8', newline='\n') as fp:
            fp.write(text)

    def write_frame(self, name, frame, *, index=False):
        frame.to_csv(self._track(name), index=index, float_format='%.12g', lineterminator='\n')

    def write_config(self, name, document: dict):
        Config(self._track(name)).update(document)

    def publish(self):
        previous = None
        if os.path.exists(self.output):
            previous = os.path.join(self.parent, f'.{os.path.basename(self.output)}-{uuid.uuid4().hex}.old')
            os.replace(self.output, previous)
        os.replace(self.staging, self.output)
        if previous is not None:
            shutil.rmtree(previous, ignore_errors=True)
        log.info('Wrote %d artifacts to %s.', len(self.written), self.output)

    @staticmethod
    def entry_to_text(entries: Iterable[Tuple[str, object]]):
        """``key: value`` lines with the keys padded to a common width."""
        entries = list(entries)
        if not entries:
            return ''
        width = max(len(a) for a, b in entries)
        return '\n'.join(f'{name:<{width}}: {entry}' for name, entry in entries) + '\n'
