# src/data_pipeline/io_utils.py

import contextlib
import os
import tempfile


@contextlib.contextmanager
def atomic_write(path: str, mode: str = "wb", encoding: str = None):
    """
    Writes to a temporary file next to `path` and renames it into place on success.

    An exception inside the block removes the temporary file and leaves any
    existing `path` untouched.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, encoding=encoding) as f:
            yield f
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_csv(frame, path: str, **kwargs) -> None:
    """Atomic `DataFrame.to_csv`."""
    with atomic_write(path, "w", encoding="utf-8") as f:
        frame.to_csv(f, **kwargs)
