"""Command-line entry point built on the top of Typer."""
from .commands.app import app
from .commands.evaluate import evaluate_command
from .commands.flops import flops
from .commands.gen_data import gen_data
from .commands.infer import infer
from .commands.train import train
from .commands.viz import viz


# Dummy export commands even though they are already registered
# to make the linter happy
__all__ = [app, evaluate_command, flops, gen_data, infer, train, viz]
