"""CLI commands, one module each."""

from app.commands import evaluate, export, gen_dataset, reconstruct, train

__all__ = ["evaluate", "export", "gen_dataset", "reconstruct", "train"]
