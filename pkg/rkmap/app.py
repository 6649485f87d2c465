"""Command-line entry point for rkmap."""

import logging
import sys
from typing import Optional

import click
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from rkmap import __version__
from rkmap.commands import commands
from rkmap.config import load_config
from rkmap.errors import RkMapError

USAGE_EXIT = 1

# Load .env files
load_dotenv('.env')
load_dotenv('.env.local', override=True)


def configure_logging(verbosity: int) -> None:
  """Route log records to standard error through rich."""
  level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
  logging.basicConfig(
    level=level,
    format='%(message)s',
    datefmt='[%X]',
    handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
    force=True,
  )


class RkMapGroup(click.Group):
  """Command group mapping failures to exit codes: 1 for usage, 2 for data or numerics."""

  def main(self, args=None, prog_name=None, complete_var=None, **extra):
    try:
      result = super().main(
        args=args, prog_name=prog_name, complete_var=complete_var, standalone_mode=False, **extra
      )
    except click.exceptions.Abort:
      click.echo('Aborted!', err=True)
      sys.exit(USAGE_EXIT)
    except click.ClickException as exc:
      exc.show()
      sys.exit(USAGE_EXIT)
    except RkMapError as exc:
      click.echo(f'Error: {exc}', err=True)
      sys.exit(exc.exit_code)
    except ValidationError as exc:
      click.echo(f'Error: {exc}', err=True)
      sys.exit(USAGE_EXIT)
    sys.exit(result if isinstance(result, int) else 0)


@click.group(cls=RkMapGroup)
@click.version_option(__version__, prog_name='rkmap')
@click.option(
  '--config',
  'config_path',
  type=click.Path(exists=True, dir_okay=False),
  help='key=value run configuration; flags override its values',
)
@click.option('--threads', type=click.IntRange(min=1), help='Worker threads (env RKMAP_THREADS)')
@click.option('-v', '--verbose', count=True, help='-v for progress, -vv for debug output')
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], threads: Optional[int], verbose: int):
  """Residual kriging of regression rasters from sparse lidar footprints."""
  configure_logging(verbose)
  ctx.obj = load_config(config_path).merged(threads=threads)


for command in commands:
  cli.add_command(command)


def main() -> None:
  cli()


if __name__ == '__main__':
  main()
