"""Utils to write a file safely, writing to a temporary file and moving it with rename"""

import logging
import os
import tempfile
from pathlib import Path


def atomic_write_bytes(data: bytes, output_file: Path) -> None:
    """Write bytes atomically (creating a temporary sibling and moving using rename)"""
    output_dir = output_file.parent
    output_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(suffix=".tmp", dir=output_dir, delete=False) as f:
        filename = f.name
        logging.getLogger("Move").debug("Writing %d bytes to %s", len(data), output_file)
        try:
            _ = f.write(data)
            f.flush()
            os.fsync(f.fileno())
        except (IOError, OSError) as e:
            logging.getLogger("Move").error("Error while writing %s: %s", output_file, e)
            f.close()
            os.unlink(filename)
            raise
    os.replace(filename, output_file)


def atomic_write_text(text: str, output_file: Path) -> None:
    """UTF-8 variant of atomic_write_bytes"""
    atomic_write_bytes(text.encode("utf-8"), output_file)
