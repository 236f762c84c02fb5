"""Define Typer app root."""

import shutil

import typer


app = typer.Typer(
    context_settings={
        "max_content_width": shutil.get_terminal_size().columns,
    },
    help="Depth estimation over learned segment hierarchies",
)
