import os
import json
from pathlib import Path

from core.errors import ConfigError, OutputLockedError

RUN_FILE = "run.json"
RESULTS_FILE = "results.csv"
PLOT_FILE = "plot.svg"
LOCK_FILE = ".lock"
CLOUD_FILE = "cloud.csv"
SAMPLE_IMAGE = "sample.hdg1"
MODEL_FILE = "model.hdgm"
FAKES_FILE = "fakes.csv"


class JSONStore:
    def __init__(self, filepath):
        self.filepath = Path(filepath)

    def load(self):
        """Parsed document, or None when missing or unreadable."""
        return self._read()

    def save(self, doc):
        self._write(doc)
        return doc

    def update(self, changes: dict):
        doc = self._read() or {}
        doc.update(changes)
        self._write(doc)
        return doc

    def _read(self):
        """Read JSON file safely."""
        try:
            if self.filepath.exists():
                with open(self.filepath, "r", encoding="utf-8") as f:
                    return json.load(f)
        except (OSError, ValueError):
            pass
        return None

    def _write(self, data):
        """Write JSON file safely (temp file, then rename)."""
        self.filepath.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.filepath.with_suffix(self.filepath.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            json.dump(data, f, indent=2, default=str)
            f.write("\n")
        os.replace(tmp, self.filepath)


class OutputDirectory:
    """One run owns a directory at a time, via an advisory lock file."""

    def __init__(self, path):
        self.path = Path(path)
        self.run = JSONStore(self.path / RUN_FILE)
        self._lock = self.path / LOCK_FILE
        self._held = False

    def file(self, name: str) -> Path:
        return self.path / name

    def __enter__(self):
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"cannot create output directory {self.path}: {e}")
        try:
            fd = os.open(self._lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise OutputLockedError(f"{self.path} is locked by another run ({LOCK_FILE} exists)")
        except OSError as e:
            raise ConfigError(f"output directory {self.path} is not writable: {e}")
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._held = True
        return self

    def __exit__(self, *exc):
        if self._held:
            self._lock.unlink(missing_ok=True)
            self._held = False
        return False
