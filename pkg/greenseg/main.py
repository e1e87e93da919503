from logging.config import dictConfig

import click

from greenseg.src import cli, config


def create_cli() -> click.Group:
    # logging configuration
    dictConfig(config.LOGGING_CONFIG)

    # command registration
    cli.cli.add_command(cli.synth)
    cli.cli.add_command(cli.prepare)
    cli.cli.add_command(cli.train)
    cli.cli.add_command(cli.hem)
    cli.cli.add_command(cli.evaluate)
    cli.cli.add_command(cli.infer)
    cli.cli.add_command(cli.vectorize)
    return cli.cli
