# Run manifests
#
# One manifest.json per output directory, one entry per command that wrote into it.
#
import os
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Dict, List

from ravenbench import __version__, file_digest, now
from ravenbench.constant import MANIFEST_FILE

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict
    version: str = __version__
    started: str = field(default_factory=lambda: now().isoformat())
    finished: str | None = None
    wall_clock: float | None = None  # seconds
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._t0 = time.monotonic()

    def add_inputs(self, paths: List[str]):
        for path in paths:
            if os.path.isfile(path):
                self.inputs[path] = file_digest(path)

    def add_outputs(self, paths: List[str]):
        for path in paths:
            self.outputs[path] = file_digest(path)

    def finish(self):
        self.finished = now().isoformat()
        self.wall_clock = round(time.monotonic() - self._t0, 3)

    def to_dict(self) -> dict:
        return asdict(self)


def manifest_path(out_dir: str) -> str:
    return os.path.join(out_dir, MANIFEST_FILE)


def read_manifest(out_dir: str) -> dict:
    path = manifest_path(out_dir)
    if not os.path.exists(path):
        return {}
    with open(path, "r") as fp:
        return json.load(fp)


def write_manifest(out_dir: str, manifest: RunManifest) -> str:
    """Merges the command entry into the directory manifest"""
    os.makedirs(out_dir, exist_ok=True)
    entries = read_manifest(out_dir)
    entries[manifest.command] = manifest.to_dict()
    path = manifest_path(out_dir)
    with open(path, "w") as fp:
        json.dump(entries, fp, indent=2, sort_keys=True, default=str)
    logger.debug(f"manifest {path} updated for {manifest.command}")
    return path
