import contextlib
import logging
import sys
import warnings
from logging.handlers import RotatingFileHandler

import click
import colorlog

import asca
from asca.errors import AscaError, ConfigError, ConfigValidationError
from pipeline import Pipeline, description


class RemoveNoise(logging.Filter):
    def filter(self, record):
        if record.levelname in ('DEBUG', 'INFO') and record.name.startswith(('joblib', 'numexpr', 'matplotlib')):
            return False
        return True


@contextlib.contextmanager
def setup_logging(*, verbose=False, log_file=None):
    log = logging.getLogger()
    try:
        # __enter__
        level = logging.DEBUG if verbose else logging.INFO
        logging.getLogger('joblib').setLevel(logging.WARNING)
        logging.captureWarnings(True)

        log.setLevel(level)
        if log_file:
            max_bytes = 32 * 1024 * 1024  # 32 MiB
            handler = RotatingFileHandler(filename=log_file, encoding='utf-8', mode='w', maxBytes=max_bytes,
                                          backupCount=5)
            dt_fmt = '%Y-%m-%d %H:%M:%S'
            fmt = logging.Formatter('[{asctime}] [{levelname:<7}] {name}: {message}', dt_fmt, style='{')
            handler.setFormatter(fmt)
            handler.addFilter(RemoveNoise())
            log.addHandler(handler)

        handler = colorlog.StreamHandler()
        handler.setFormatter(
            colorlog.ColoredFormatter(
                "%(log_color)s[%(asctime)s] [%(name)-15s] [%(levelname)-7s]: %(message)s",
                "%Y-%m-%d %H:%M:%S")
        )
        handler.addFilter(RemoveNoise())
        log.addHandler(handler)

        yield
    finally:
        # __exit__
        logging.captureWarnings(False)
        handlers = log.handlers[:]
        for hdlr in handlers:
            hdlr.close()
            log.removeHandler(hdlr)


def fail(error: AscaError):
    log = logging.getLogger()
    if isinstance(error, ConfigValidationError):
        click.echo('Invalid config:', err=True)
        for violation in error.violations:
            click.echo(f'  {violation}', err=True)
    else:
        click.echo(f'{type(error).__name__}: {error}', err=True)
    log.debug('Run aborted.', exc_info=error)
    sys.exit(error.exit_code)


@click.group(help=description, options_metavar='[options]')
@click.option('-v', '--verbose', help='Log debug messages.', is_flag=True)
@click.option('--log-file', help='Also log to this file (rotated at 32 MiB).', type=click.Path(dir_okay=False))
@click.pass_context
def main(ctx, verbose, log_file):
    """Fits and tests ASCA models of cyclostationary time series."""
    ctx.obj = {'verbose': verbose, 'log_file': log_file}


@main.command(short_help='Run the pipeline of a config', options_metavar='[options]')
@click.argument('config', type=click.Path(dir_okay=False))
@click.pass_context
def run(ctx, config):
    """Runs every stage of CONFIG and writes the outputs to its output directory."""
    with setup_logging(**ctx.obj):
        try:
            pipeline = Pipeline.from_file(config)
            with warnings.catch_warnings():
                warnings.simplefilter('always')
                state = pipeline.run()
        except AscaError as e:
            fail(e)
        else:
            click.echo(f'Wrote {len(state.artifacts)} files to {pipeline.config.output}')


@main.command(short_help='Check a config without running it', options_metavar='[options]')
@click.argument('config', type=click.Path(dir_okay=False))
@click.pass_context
def validate(ctx, config):
    """Lists every problem in CONFIG; exits with 2 if there is any."""
    with setup_logging(**ctx.obj):
        try:
            violations = Pipeline.from_file(config).validate()
        except ConfigError as e:
            fail(e)
        else:
            if violations:
                fail(ConfigValidationError(violations))
            click.echo('Config is valid.')


@main.command(short_help='Show the version')
def version():
    """Shows the package version."""
    click.echo(asca.__version__)


if __name__ == '__main__':
    main()
