import functools
import sys
import traceback
import uuid

import typer
from pydantic import ValidationError

from harmonic_flow.exceptions import EXIT_DOMAIN, EXIT_IO, HarmonicFlowError
from harmonic_flow.logger import logger

app = typer.Typer(
    name="harmonic-flow",
    help="Harmonic propagation studies on radial three-phase feeders",
    no_args_is_help=True,
    add_completion=False,
)


def handle_errors(command):
    """
    Map failures to exit codes: domain errors 1, file errors 2.
    Anything unexpected is logged with its stacktrace and exits 1.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except HarmonicFlowError as e:
            typer.echo(f"error: {e.detail}", err=True)
            raise typer.Exit(code=e.exit_code)
        except (ValueError, ValidationError) as e:
            typer.echo(f"error: {e}", err=True)
            raise typer.Exit(code=EXIT_DOMAIN)
        except OSError as e:
            typer.echo(f"error: {e}", err=True)
            raise typer.Exit(code=EXIT_IO)
        except Exception as e:
            logger.log_internal(
                level="ERROR",
                event="unhandled_exception",
                run_id=str(uuid.uuid4()),
                error=f"{type(e).__name__}: {str(e)}",
                command=command.__name__,
                stacktrace=traceback.format_exc()
            )
            typer.echo("error: internal error", err=True)
            raise typer.Exit(code=EXIT_DOMAIN)

    return wrapper


from harmonic_flow.commands import network, studies  # noqa: E402

for module in (network, studies):
    for name, command in module.COMMANDS:
        app.command(name)(handle_errors(command))


def main():
    app(prog_name="harmonic-flow")


if __name__ == "__main__":
    sys.exit(main())
