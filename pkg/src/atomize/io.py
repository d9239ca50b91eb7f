"""Atomic file writes, content hashes, run manifests and checkpoints."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from importlib import metadata

from .model import MlpParams

MANIFEST_SCHEMA = 1
# timestamps are left out of the hash so reruns hash identically; file digests
# are left out because JSON outputs embed the hash themselves
UNHASHED_KEYS = ("started", "finished", "files", "manifest_hash")


class HashMismatch(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in columns)])
    return buf.getvalue()


def build_manifest(command: str, config: dict, outputs, started: float | None = None) -> dict:
    body = {"schema": MANIFEST_SCHEMA, "tool_version": tool_version(), "command": command,
            "config": config, "outputs": sorted(os.path.basename(os.fspath(p)) for p in outputs)}
    body["manifest_hash"] = manifest_hash(body)
    body["started"] = started if started is not None else time.time()
    return body


def manifest_hash(manifest: dict) -> str:
    body = {k: v for k, v in manifest.items() if k not in UNHASHED_KEYS}
    return sha256_text(canonical_json(body))


def finish_manifest(path, manifest: dict, outputs) -> dict:
    """Record the sha256 of every written output and write the manifest itself."""
    manifest = dict(manifest)
    manifest["files"] = {os.path.basename(os.fspath(p)): sha256_file(p) for p in outputs}
    manifest["finished"] = time.time()
    write_atomic(path, canonical_json(manifest))
    return manifest


def save_checkpoint(path, params: MlpParams, config_hash: str, data_hash: str, manifest_hash_: str,
                    **extra) -> dict:
    ckpt = params.to_dict()
    ckpt.update(config_hash=config_hash, data_hash=data_hash, manifest_hash=manifest_hash_, **extra)
    write_atomic(path, canonical_json(ckpt))
    return ckpt


def load_checkpoint(path, data_hash: str | None = None):
    """Returns ``(params, raw dict)``; refuses a checkpoint trained on other data."""
    with open(path) as fh:
        ckpt = json.load(fh)
    missing = {"w1", "b1", "w2", "b2"} - set(ckpt)
    if missing:
        raise ValueError(f"checkpoint {path} lacks {sorted(missing)}")
    if data_hash is not None and ckpt.get("data_hash") != data_hash:
        raise HashMismatch(f"checkpoint {path} was trained on data {ckpt.get('data_hash', '?')[:12]}, "
                           f"given data hashes to {data_hash[:12]}")
    return MlpParams.from_dict(ckpt), ckpt
