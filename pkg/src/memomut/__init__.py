"""Mutation analysis for the Mini language with lossless memoization.

The pipeline profiles a test suite, records memo-tables for expensive
deterministic functions from the unmutated program, and replays those
tables while running mutants, bypassing function bodies on cache hits
without changing any mutant verdict.
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def corpus_path(name: str) -> Path:
    """Directory of a bundled corpus program, e.g. corpus_path("sample")."""
    root = resources.files(__name__) / "corpus" / name
    path = Path(str(root))
    if not path.is_dir():
        raise FileNotFoundError(f"no bundled corpus program named {name!r}")
    return path


def corpus_names() -> list[str]:
    root = Path(str(resources.files(__name__) / "corpus"))
    return sorted(p.name for p in root.iterdir() if p.is_dir())
