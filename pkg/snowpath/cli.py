#
# Copyright Elasticsearch B.V. and/or licensed to Elasticsearch B.V. under one
# or more contributor license agreements. See the NOTICE file distributed with
# this work for additional information regarding copyright
# ownership. Elasticsearch B.V. licenses this file to you under
# the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# 	http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
#
from typing import Any

import click
from overrides import override

from . import __version__
from .commands.pipeline import build, classify, sweep, synth
from .exceptions import ExitCode
from .utils import SharedContext


class PipelineGroup(click.Group):
    """Group reporting usage errors with the usage exit code."""

    @override
    def make_context(
        self,
        info_name: str | None,
        args: list[str],
        parent: click.Context | None = None,
        **extra: Any,
    ) -> click.Context:
        try:
            return super().make_context(info_name, args, parent, **extra)
        except click.UsageError as err:
            err.exit_code = ExitCode.USAGE
            raise

    @override
    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as err:
            err.exit_code = ExitCode.USAGE
            raise


@click.group("snowpath", cls=PipelineGroup, invoke_without_command=True)
@click.option(
    "--debug",
    help="Enable debug mode.",
    is_flag=True,
    default=False,
    envvar="SNOWPATH_DEBUG",
)
@click.option(
    "-v",
    "--verbose",
    help="Make the operation more talkative.",
    is_flag=True,
    default=False,
    envvar="SNOWPATH_VERBOSE",
)
@click.version_option(__version__)
@click.pass_context
def main(ctx: click.Context, debug: bool, verbose: bool) -> None:
    """Snowpath learns where sidewalks are from clear-weather reconstructions and flags snow-covered sidewalks in later images."""
    SharedContext.init(debug, verbose)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# Register commands
main.add_command(build)
main.add_command(classify)
main.add_command(sweep)
main.add_command(synth)
