"""
A few quick static methods.
"""
from typing import Any, Iterable, List, Sequence
import csv
import hashlib
import json

import numpy as np

from droid import log

# Few static helper methods -------------------

U64_MASK = (1 << 64) - 1


def print_progress_bar(count: int, total: int, label: str = "Progress") -> None:
    """Helper method to print progress bar.  Stolen on the web"""
    size = 0.3  # size of progress bar
    percent = int(float(count) / float(total) * 100) if total else 100
    log.info(
        f"{label} - [{'=' * int(int(percent) * size)}{' ' * int((100 - int(percent)) * size)}] {percent}% - {count} / {total}"
    )


def derive_seed(base: int, *keys: int) -> int:
    """
    Derive an independent 64-bit seed from a base seed and integer keys
    (generation number, episode index...).
    """
    entropy = [int(base) & U64_MASK] + [int(k) & U64_MASK for k in keys]
    words = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 32) | int(words[1])


def canonical_json(obj: Any) -> str:
    """JSON dump with sorted keys, used for hashing and byte-stable artifacts."""
    return json.dumps(obj, sort_keys=True, indent=2)


def sha256_json(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fmt(value: Any) -> str:
    """Format a CSV cell. Floats use ``repr`` so reading them back is exact."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV file with a header row, ``.`` decimals and ``\\n`` newlines."""
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path: str) -> List[List[str]]:
    """Read a CSV file written by `write_csv`, header row included."""
    with open(path, "r", newline="") as fp:
        return [row for row in csv.reader(fp)]
