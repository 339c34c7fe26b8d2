"""Run configuration shared by every command.

Values come from command-line flags, then ``FIRMSCAN_*`` environment
variables, then an optional flat ``key=value`` file. Click resolves that
precedence; the file is handed to it as the context ``default_map``.
Credentials are only ever read from the environment.

"""
from dataclasses import dataclass
import os
from pathlib import Path
from typing import Dict, Optional, Union

import click

from firmscan import globals as project_globals
from firmscan import paths
from firmscan.globals import CLASSIFIER_MODES
from firmscan.exceptions import ConfigError

CONFIG_FILE_KEYS = ('index', 'cache_dir', 'out', 'offline', 'classifier', 'llm_endpoint', 'llm_model',
                    'jobs', 'reproducible', 'stdout')


@dataclass(frozen=True)
class RunConfig:
    index_path: Path
    cache_dir: Path
    out_dir: Path
    classifier_mode: str = CLASSIFIER_MODES.RULE
    llm_endpoint: Optional[str] = None
    llm_model: str = project_globals.LLM_DEFAULT_MODEL
    classifier_api_key: Optional[str] = None
    nvd_api_key: Optional[str] = None
    offline: bool = True
    reproducible: bool = False
    parallelism: int = 1
    stdout: bool = False

    def validate(self) -> 'RunConfig':
        """Checks the configuration invariants.

        Raises
        ------
        ConfigError
            If the remote classifier is selected without an endpoint or a
            credential, or the worker count is below one.

        """
        if self.classifier_mode not in CLASSIFIER_MODES:
            raise ConfigError(f'Unknown classifier mode {self.classifier_mode!r}. '
                              f'Choose one of {list(CLASSIFIER_MODES)}.')
        if self.classifier_mode == CLASSIFIER_MODES.RULE_THEN_LLM:
            if not self.llm_endpoint:
                raise ConfigError('The rule-then-llm classifier needs --llm-endpoint.')
            if not self.classifier_api_key:
                raise ConfigError(f'The rule-then-llm classifier needs a credential in '
                                  f'{project_globals.CLASSIFIER_API_KEY_ENV}.')
        if self.parallelism < 1:
            raise ConfigError(f'--jobs must be at least 1, got {self.parallelism}.')
        return self

    def require_online(self, command: str):
        if self.offline:
            raise ConfigError(f'{command} needs network access; run it with --online.')


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Reads a flat ``key=value`` configuration file.

    Blank lines and lines starting with ``#`` are ignored. Keys are the long
    flag names, written with ``-`` or ``_``.

    Raises
    ------
    OSError
        If the file cannot be read.
    ConfigError
        If a line is not ``key=value`` or names an unknown key.

    """
    values = {}
    for number, line in enumerate(Path(path).read_text(encoding='utf-8').splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, separator, value = line.partition('=')
        if not separator:
            raise ConfigError(f'{path}:{number}: expected key=value, got {line!r}.')
        key = key.strip().lstrip('-').replace('-', '_')
        if key not in CONFIG_FILE_KEYS:
            raise ConfigError(f'{path}:{number}: unknown key {key!r}.')
        values[key] = value.strip()
    return values


def load_config_file(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[str]:
    """Click callback installing a configuration file as the default map."""
    if value:
        try:
            defaults = read_config_file(value)
        except (OSError, ConfigError) as e:
            click.echo(f'Error: cannot use configuration file: {e}', err=True)
            ctx.exit(e.exit_code if isinstance(e, ConfigError) else project_globals.EXIT_CODES.CONFIG)
        ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return value


def build_run_config(index: Optional[str], cache_dir: Optional[str], out: str, offline: bool,
                     classifier: str, llm_endpoint: Optional[str], llm_model: str, jobs: int,
                     reproducible: bool, stdout: bool) -> RunConfig:
    cache_dir = Path(cache_dir) if cache_dir else paths.default_cache_dir()
    return RunConfig(
        index_path=Path(index) if index else cache_dir / 'nvd_index.json',
        cache_dir=cache_dir,
        out_dir=Path(out),
        classifier_mode=classifier,
        llm_endpoint=llm_endpoint or None,
        llm_model=llm_model,
        classifier_api_key=os.environ.get(project_globals.CLASSIFIER_API_KEY_ENV) or None,
        nvd_api_key=os.environ.get(project_globals.NVD_API_KEY_ENV) or None,
        offline=offline,
        reproducible=reproducible,
        parallelism=jobs,
        stdout=stdout,
    )
