import hashlib
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Union

from kgalign.logging import logger


class ContractViolation(ValueError):
    """Raised when a caller breaks an operation's precondition"""


def file_digest(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def digests(paths: Dict[str, Union[str, Path]]) -> Dict[str, Dict]:
    """Path and sha256 digest of each input file, keyed by its role"""
    return {
        role: {"path": str(path), "sha256": file_digest(path)}
        for role, path in paths.items()
    }


@contextmanager
def timed(name: str, timings: Dict[str, float]):
    """
    Record the wall-clock duration of the wrapped block,
    in milliseconds, under `name` in `timings`
    """

    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = (time.perf_counter() - start) * 1000
        timings[name] = timings.get(name, 0.0) + elapsed
        logger.debug(f"Stage '{name}' took {elapsed:.1f} ms")
