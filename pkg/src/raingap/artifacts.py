"""
Model artifacts and state digests.

Fitted learners, imputers and scalers are stored with joblib inside a small versioned
envelope. State digests hash the numeric content of a fitted object, so two fits can
be compared bit for bit without relying on pickle byte layouts.
"""

import dataclasses
import hashlib
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import numpy as np
from joblib import dump, load

from .const import VERSION
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

ARTIFACT_FORMAT = 1


def _feed(h: Any, obj: Any) -> None:
    if isinstance(obj, np.ndarray):
        h.update(f"nd{obj.dtype.str}{obj.shape}".encode())
        h.update(np.ascontiguousarray(obj).tobytes())
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        h.update(f"dc{type(obj).__name__}".encode())
        for item in dataclasses.fields(obj):
            if item.compare:
                h.update(item.name.encode())
                _feed(h, getattr(obj, item.name))
    elif isinstance(obj, dict):
        h.update(b"{")
        for key in sorted(obj, key=str):
            h.update(str(key).encode())
            _feed(h, obj[key])
        h.update(b"}")
    elif isinstance(obj, (list, tuple)):
        h.update(b"[")
        for item in obj:
            _feed(h, item)
        h.update(b"]")
    else:
        h.update(repr(obj).encode())


def state_digest(obj: Any) -> str:
    """SHA-256 over the arrays and scalars reachable from a fitted object."""
    h = hashlib.sha256()
    _feed(h, obj)
    return h.hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        while True:
            block = handle.read(1024 * 1024)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def input_digests(paths: Iterable[Union[str, Path]]) -> Dict[str, str]:
    """Digest of each input file keyed by its file name."""
    return {Path(p).name: file_digest(p) for p in sorted(paths, key=lambda p: Path(p).name)}


def save_model(path: Union[str, Path], model: Any, kind: str) -> Path:
    """
    Store a fitted object in a versioned joblib envelope.

    Args:
        path: Output file
        model: Fitted learner, imputer or scaler
        kind: Short label checked again on load

    Returns:
        Path written
    """
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    envelope = {
        "format": ARTIFACT_FORMAT,
        "version": VERSION,
        "kind": kind,
        "digest": state_digest(model),
        "payload": model,
    }
    dump(envelope, path)
    logger.info(f"Saved {kind} artifact to {path}")
    return path


def load_model(path: Union[str, Path], kind: str) -> Any:
    """
    Load an artifact written by :func:`save_model`.

    Raises:
        ConfigError: If the file is not an artifact of the expected kind and format
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"artifact not found: {path}")
    envelope = load(path)
    if not isinstance(envelope, dict) or envelope.get("format") != ARTIFACT_FORMAT:
        raise ConfigError(f"{path} is not a raingap artifact (format {ARTIFACT_FORMAT})")
    if envelope.get("kind") != kind:
        raise ConfigError(f"{path} holds a '{envelope.get('kind')}' artifact, expected '{kind}'")
    payload = envelope["payload"]
    if state_digest(payload) != envelope.get("digest"):
        raise ConfigError(f"{path}: artifact content does not match its digest")
    return payload
