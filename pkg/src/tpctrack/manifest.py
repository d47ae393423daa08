"""Run manifests: every CLI run writes one JSON document beside its outputs."""

from __future__ import annotations

import hashlib
import json
import os
import time
from typing import Dict, List, Optional, Sequence


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, command: str, config_path: Optional[str],
                 parameters: dict):
        self.command = command
        self.config_path = config_path
        self.parameters = parameters
        self.inputs: List[Dict[str, str]] = []
        self.outputs: List[Dict[str, object]] = []
        self._t0 = time.monotonic()

    def add_input(self, path: str) -> None:
        entry = {"path": path}
        if os.path.isfile(path):
            entry["sha256"] = sha256_file(path)
        self.inputs.append(entry)

    def add_output(self, path: str) -> None:
        if os.path.isdir(path):
            for name in sorted(os.listdir(path)):
                sub = os.path.join(path, name)
                if os.path.isfile(sub):
                    self.add_output(sub)
            return
        self.outputs.append({
            "path": path,
            "sha256": sha256_file(path),
            "bytes": os.path.getsize(path),
        })

    def write(self, out_path: str) -> str:
        doc = {
            "manifest_version": 1,
            "command": self.command,
            "config_path": self.config_path,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_time_s": round(time.monotonic() - self._t0, 3),
        }
        path = out_path + ".manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
