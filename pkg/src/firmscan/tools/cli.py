"""
=============
firmscan CLI
=============

click application tying the pipeline together: offline NVD ingestion,
firmware scanning to CycloneDX SBOMs, per-firmware analysis, corpus runs
and the memory-safety impact estimate.

Global options can also be given as ``FIRMSCAN_<OPTION>`` environment
variables or as ``key=value`` lines in a ``--config`` file. Flags win over
the environment, which wins over the file. Human-readable output goes to
stderr; ``--stdout`` additionally writes the command's machine output to
stdout.

"""
from bdb import BdbQuit
import functools
import sys
from typing import Any, Callable, NamedTuple

import click
from loguru import logger

from firmscan import globals as project_globals
from firmscan.globals import CLASSIFIER_MODES, EXIT_CODES
from firmscan.exceptions import FirmscanError
from firmscan.tools import commands
from firmscan.tools.app_logging import configure_logging_to_terminal
from firmscan.tools.config import RunConfig, build_run_config, load_config_file


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, FirmscanError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_CODES.IO
    return 1


def handle_exceptions(func: Callable, logger: Any, with_debugger: bool) -> Callable:
    """Wraps a command so that errors are logged and mapped to exit codes.

    With ``with_debugger`` the post-mortem debugger is opened before exiting.

    """
    @functools.wraps(func)
    def wrapped(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (BdbQuit, KeyboardInterrupt, click.exceptions.Exit, click.Abort):
            raise
        except Exception as e:
            code = exit_code_for(e)
            if code == 1:
                logger.exception(f'Uncaught exception {e}')
            else:
                logger.error(f'{type(e).__name__}: {e}')
            if with_debugger:
                import pdb
                import traceback
                traceback.print_exc()
                pdb.post_mortem()
            sys.exit(code)
    return wrapped


class Session(NamedTuple):
    config: RunConfig
    with_debugger: bool

    def run(self, func: Callable, *args):
        main = handle_exceptions(func, logger, with_debugger=self.with_debugger)
        return main(self.config, *args)


@click.group(context_settings={'auto_envvar_prefix': project_globals.ENV_PREFIX})
@click.option('--config', 'config_file',
              type=click.Path(dir_okay=False),
              is_eager=True,
              expose_value=False,
              callback=load_config_file,
              help='Flat key=value file with defaults for the global options.')
@click.option('--index',
              type=click.Path(dir_okay=False),
              help='Vulnerability index file. Defaults to nvd_index.json in the cache directory.')
@click.option('--cache-dir',
              type=click.Path(file_okay=False),
              help=f'Cache root. Defaults to ${project_globals.CACHE_DIR_ENV} or ~/.cache/firmscan.')
@click.option('--out',
              default='firmscan-out',
              show_default=True,
              type=click.Path(file_okay=False),
              help='Output directory.')
@click.option('--offline/--online',
              default=True,
              show_default=True,
              help='Forbid network access other than an explicitly configured classifier endpoint.')
@click.option('--classifier',
              default=CLASSIFIER_MODES.RULE,
              show_default=True,
              type=click.Choice(list(CLASSIFIER_MODES)),
              help='Memory classification mode.')
@click.option('--llm-endpoint',
              help='OpenAI-compatible chat completions URL for the rule-then-llm classifier.')
@click.option('--llm-model',
              default=project_globals.LLM_DEFAULT_MODEL,
              show_default=True,
              help='Model name sent to the classifier endpoint.')
@click.option('--jobs',
              default=1,
              show_default=True,
              type=int,
              help='Number of parallel corpus workers.')
@click.option('--reproducible',
              is_flag=True,
              help='Fixed timestamps and derived serial numbers for byte-identical outputs.')
@click.option('--stdout',
              is_flag=True,
              help='Also write the machine-readable result to stdout.')
@click.option('-v', 'verbose',
              count=True,
              help='Configure logging verbosity.')
@click.option('--pdb', 'with_debugger',
              is_flag=True,
              help='Drop into python debugger if an error occurs.')
@click.pass_context
def firmscan(ctx: click.Context, index: str, cache_dir: str, out: str, offline: bool, classifier: str,
             llm_endpoint: str, llm_model: str, jobs: int, reproducible: bool, stdout: bool, verbose: int,
             with_debugger: bool) -> None:
    """Firmware component inventory, CVE matching and memory-safety analysis."""
    configure_logging_to_terminal(verbose)
    config = build_run_config(index, cache_dir, out, offline, classifier, llm_endpoint, llm_model, jobs,
                              reproducible, stdout)
    handle_exceptions(config.validate, logger, with_debugger=with_debugger)()
    ctx.obj = Session(config, with_debugger)


@firmscan.group()
def feed() -> None:
    """Vulnerability feed management."""


@feed.command()
@click.argument('feeds', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def ingest(session: Session, feeds) -> None:
    """Build the vulnerability index from NVD CVE API 2.0 JSON files."""
    session.run(commands.ingest_feeds, feeds)


@feed.command()
@click.argument('out_path', type=click.Path(dir_okay=False))
@click.option('--cpe-name', help='Restrict the download to one CPE name.')
@click.option('--keyword', help='Restrict the download to a keyword search.')
@click.pass_obj
def fetch(session: Session, out_path: str, cpe_name: str, keyword: str) -> None:
    """Download CVE data from the NVD API into a file for ``feed ingest``.

    Needs ``--online``; ``$FIRMSCAN_NVD_API_KEY`` raises the request rate.

    """
    session.run(commands.fetch_feed, out_path, cpe_name, keyword)


@firmscan.command()
@click.argument('image', type=click.Path())
@click.pass_obj
def scan(session: Session, image: str) -> None:
    """Extract a firmware image (or pre-extracted directory or tar) and write its SBOM."""
    session.run(commands.scan_image, image)


@firmscan.command()
@click.argument('path', type=click.Path())
@click.pass_obj
def analyze(session: Session, path: str) -> None:
    """Match an SBOM (.json) or firmware input against the index and classify its CVEs."""
    session.run(commands.analyze_path, path)


@firmscan.command()
@click.argument('directory', type=click.Path(file_okay=False))
@click.pass_obj
def corpus(session: Session, directory: str) -> None:
    """Analyse every input of a directory and write the corpus reports.

    An optional manifest.csv (path,vendor) in the directory groups results
    by vendor.

    """
    session.run(commands.analyze_corpus, directory)


@firmscan.command()
@click.argument('occurrences_csv', type=click.Path(dir_okay=False))
@click.option('--protection-coverage',
              default=1.0,
              show_default=True,
              type=float,
              help='Fraction of memory-related occurrences the protection removes.')
@click.pass_obj
def impact(session: Session, occurrences_csv: str, protection_coverage: float) -> None:
    """Print the before/after severity table and the reduction factor."""
    session.run(commands.report_impact, occurrences_csv, protection_coverage)
