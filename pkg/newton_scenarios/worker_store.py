# -*- coding: utf-8 -*-

"""
Binary bank and encoder parameter files: a magic line, a YAML manifest and
a little-endian payload. Files are replaced atomically.
"""
from dataclasses import dataclass
import hashlib
import logging
import os
import tempfile
from typing import Dict, Tuple

import numpy as np
import yaml

from newton_scenarios.catalog import CatalogEntry, ViewpointSpec
from newton_scenarios.errors import StorageError
from newton_scenarios.worker_dynamics import STATES_PER_ENTRY, TrajectoryState
from newton_scenarios.worker_matching import (
    EncoderParams,
    ScenarioBank,
    bank_from_columns,
)


mlogger = logging.getLogger("newton-scenarios")


BANK_MAGIC = "NEWTONBANK"
PARAMS_MAGIC = "NEWTONPARAMS"
FORMAT_VERSION = 1
MANIFEST_END = b"\n...\n"
BANK_DTYPE = np.dtype("<f4")
PARAMS_DTYPE = np.dtype("<f8")


@dataclass(eq=False)
class BankFile:
    bank: ScenarioBank
    raw_dim: int
    encoder: str = "identity"
    seed: int = 0
    version: int = FORMAT_VERSION

    def manifest(self) -> Dict:
        entries = []
        for entry in self.bank.catalog:
            record = entry.to_dict()
            record["states"] = [
                s.to_dict() for s in self.bank.states.get(entry.entry_id, [])
            ]
            entries.append(record)
        return dict(
            format_version=self.version,
            descriptor_dim=self.bank.descriptor_dim,
            raw_dim=self.raw_dim,
            states_per_entry=STATES_PER_ENTRY,
            encoder=self.encoder,
            seed=self.seed,
            entries=entries,
        )


def file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def atomic_write(path: str, data: bytes) -> None:
    """
    Writes bytes to a temporary sibling and renames it over the target

    Args:
        path:                   destination file
        data:                   file content
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    except OSError as exc:
        raise StorageError(f"Unable to write '{path}'. {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise StorageError(f"Unable to write '{path}'. {exc}") from exc
    mlogger.debug(f"Wrote {len(data)} bytes to '{path}'.")


def _pack(magic: str, manifest: Dict, payload: bytes) -> bytes:
    header = f"{magic} {manifest['format_version']}\n".encode("utf-8")
    body = yaml.safe_dump(manifest, sort_keys=True).encode("utf-8")
    return header + body.rstrip(b"\n") + MANIFEST_END + payload


def _unpack(path: str, magic: str) -> Tuple[Dict, bytes]:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise StorageError(f"Unable to read '{path}'. {exc}") from exc

    first, _, rest = data.partition(b"\n")
    try:
        name, version = first.decode("utf-8").split(" ")
        version = int(version)
    except (UnicodeDecodeError, ValueError):
        raise StorageError(f"'{path}' is not a {magic} file.")
    if name != magic:
        raise StorageError(f"'{path}' is not a {magic} file.")
    if version != FORMAT_VERSION:
        raise StorageError(f"'{path}' has unsupported format version {version}.")

    body, sep, payload = rest.partition(MANIFEST_END)
    if not sep:
        raise StorageError(f"'{path}' has no manifest terminator.")
    try:
        manifest = yaml.safe_load(body.decode("utf-8"))
    except (UnicodeDecodeError, yaml.YAMLError) as exc:
        raise StorageError(f"'{path}' has a malformed manifest. {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format_version") != version:
        raise StorageError(f"'{path}' manifest does not match its header.")
    return manifest, payload


def save_bank(path: str, bank_file: BankFile) -> None:
    """
    Writes bank file: manifest plus float32 payload of entries x D x states
    in entry order

    Args:
        path:                   destination file
        bank_file:              BankFile to persist
    """
    payload = np.ascontiguousarray(bank_file.bank.stack, dtype=BANK_DTYPE).tobytes()
    atomic_write(path, _pack(BANK_MAGIC, bank_file.manifest(), payload))
    mlogger.info(f"Saved bank of {len(bank_file.bank)} entries to '{path}'.")


def load_bank(path: str) -> BankFile:
    """
    Reads bank file written by save_bank

    Args:
        path:                   bank file

    Returns:
        BankFile
    """
    manifest, payload = _unpack(path, BANK_MAGIC)
    try:
        dim = int(manifest["descriptor_dim"])
        per_entry = int(manifest["states_per_entry"])
        records = manifest["entries"]
        catalog = [
            CatalogEntry(
                int(r["entry_id"]),
                int(r["scenario_id"]),
                ViewpointSpec(float(r["azimuth"]), float(r["elevation"])),
            )
            for r in records
        ]
        states = {
            int(r["entry_id"]): [TrajectoryState.from_dict(s) for s in r["states"]]
            for r in records
        }
        raw_dim = int(manifest["raw_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"'{path}' manifest is incomplete. {exc}") from exc

    expected = len(catalog) * dim * per_entry * BANK_DTYPE.itemsize
    if len(payload) != expected:
        raise StorageError(
            f"'{path}' payload has {len(payload)} bytes, expected {expected}."
        )
    stack = np.frombuffer(payload, dtype=BANK_DTYPE).reshape(
        len(catalog), dim, per_entry
    )
    bank = bank_from_columns(catalog, stack.astype(float), states)
    return BankFile(
        bank=bank,
        raw_dim=raw_dim,
        encoder=str(manifest.get("encoder", "identity")),
        seed=int(manifest.get("seed", 0)),
        version=int(manifest["format_version"]),
    )


def save_params(path: str, params: EncoderParams) -> None:
    """
    Writes encoder params: weight, bias, classifier weight, classifier bias
    as float64 in that order
    """
    manifest = dict(
        format_version=FORMAT_VERSION,
        descriptor_dim=params.descriptor_dim,
        raw_dim=params.raw_dim,
        classes=params.classes,
    )
    payload = b"".join(
        np.ascontiguousarray(a, dtype=PARAMS_DTYPE).tobytes() for a in params.arrays()
    )
    atomic_write(path, _pack(PARAMS_MAGIC, manifest, payload))


def load_params(path: str) -> EncoderParams:
    manifest, payload = _unpack(path, PARAMS_MAGIC)
    try:
        d = int(manifest["descriptor_dim"])
        r = int(manifest["raw_dim"])
        k = int(manifest["classes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"'{path}' manifest is incomplete. {exc}") from exc

    shapes = [(d, r), (d,), (k, d), (k,)]
    sizes = [int(np.prod(s)) for s in shapes]
    expected = sum(sizes) * PARAMS_DTYPE.itemsize
    if len(payload) != expected:
        raise StorageError(
            f"'{path}' payload has {len(payload)} bytes, expected {expected}."
        )
    flat = np.frombuffer(payload, dtype=PARAMS_DTYPE).astype(float)
    arrays = []
    start = 0
    for shape, size in zip(shapes, sizes):
        arrays.append(flat[start : start + size].reshape(shape))
        start += size
    return EncoderParams(*arrays)
