"""
Lagland package initialization.
"""
import jax

from lagland.__about__ import VERSION

jax.config.update("jax_enable_x64", True)


def main() -> None:
    """
    Main entry point for the package.
    """
    from lagland.api.cli import main as cli_main

    raise SystemExit(cli_main())
