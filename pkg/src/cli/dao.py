"""STIV1 checkpoints and CSV loss logs.

Checkpoint layout: the magic bytes ``STIV1``, a little-endian uint64 header
length, a UTF-8 JSON header (manifest sorted by name, config blob, metadata),
then the raw little-endian tensor payloads at the manifest offsets.
"""
import csv
import io
import json
import struct
from pathlib import Path
from typing import List

import numpy as np
from pydantic import ValidationError

from ..constants import CHECKPOINT_MAGIC
from ..dao import BaseDAO, PathLike
from ..exceptions import CheckpointException
from ..logger import logger
from ..training import StepRecord
from .schemas import Checkpoint, CheckpointHeader, TensorEntry

_LENGTH = struct.Struct("<Q")
LOSS_COLUMNS = ("step", "loss", "grad_norm", "lr")


class CheckpointDAO(BaseDAO[Checkpoint]):
    suffix = ".stiv"

    @classmethod
    def encode(cls, record: Checkpoint) -> bytes:
        manifest, payloads, offset = [], [], 0
        for name in sorted(record.tensors):
            array = np.asarray(record.tensors[name])
            little = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))
            raw = little.tobytes()
            manifest.append(
                TensorEntry(name=name, dtype=little.dtype.str, shape=list(array.shape), offset=offset, nbytes=len(raw))
            )
            payloads.append(raw)
            offset += len(raw)
        header = CheckpointHeader(manifest=manifest, config=record.config, meta=record.meta)
        blob = header.model_dump_json().encode("utf-8")
        return CHECKPOINT_MAGIC + _LENGTH.pack(len(blob)) + blob + b"".join(payloads)

    @classmethod
    def decode(cls, payload: bytes) -> Checkpoint:
        if not payload.startswith(CHECKPOINT_MAGIC):
            raise CheckpointException("not a STIV1 checkpoint (bad magic)")
        start = len(CHECKPOINT_MAGIC)
        if len(payload) < start + _LENGTH.size:
            raise CheckpointException("truncated checkpoint header")
        (length,) = _LENGTH.unpack_from(payload, start)
        body = start + _LENGTH.size + length
        try:
            header = CheckpointHeader.model_validate(json.loads(payload[start + _LENGTH.size : body].decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
            raise CheckpointException(f"corrupt checkpoint header: {e}") from e
        names = [entry.name for entry in header.manifest]
        if names != sorted(set(names)):
            raise CheckpointException("checkpoint manifest names must be unique and sorted")
        tensors = {}
        for entry in header.manifest:
            lo = body + entry.offset
            if lo + entry.nbytes > len(payload):
                raise CheckpointException(f"tensor {entry.name} runs past the end of the file")
            array = np.frombuffer(payload, dtype=np.dtype(entry.dtype), count=int(np.prod(entry.shape, dtype=np.int64)), offset=lo)
            tensors[entry.name] = array.reshape(entry.shape).astype(array.dtype.newbyteorder("="))
        return Checkpoint(tensors=tensors, config=header.config, meta=header.meta)

    @classmethod
    def save(cls, root: PathLike, key: str, record: Checkpoint) -> Path:
        path = super().save(root, key, record)
        logger.bind(tensors=len(record.tensors)).info(f"wrote checkpoint {path}")
        return path


class LossLogDAO(BaseDAO[List[StepRecord]]):
    """CSV with a header row and LF line endings."""

    suffix = ".csv"

    @classmethod
    def encode(cls, record: List[StepRecord]) -> bytes:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(LOSS_COLUMNS)
        for row in record:
            writer.writerow([row.step, repr(row.loss), repr(row.grad_norm), repr(row.lr)])
        return buffer.getvalue().encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> List[StepRecord]:
        reader = csv.DictReader(io.StringIO(payload.decode("utf-8")))
        return [StepRecord(**row) for row in reader]

    @classmethod
    def append(cls, root: PathLike, key: str, records: List[StepRecord], after_step: int = 0) -> Path:
        """Keep logged rows up to ``after_step`` and add ``records``."""
        kept = [r for r in cls.load(root, key) if r.step <= after_step] if cls.exists(root, key) else []
        return cls.save(root, key, kept + list(records))


class ReportDAO(BaseDAO[dict]):
    """Pretty-printed JSON documents (evaluation reports, surgery audits)."""

    suffix = ".json"

    @classmethod
    def encode(cls, record: dict) -> bytes:
        return (json.dumps(record, indent=2, sort_keys=True) + "\n").encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> dict:
        try:
            return json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointException(f"corrupt JSON report: {e}") from e


class GridDAO(BaseDAO[List[dict]]):
    """Grid-search rows as CSV; columns follow the first row's keys."""

    suffix = ".csv"

    @classmethod
    def encode(cls, record: List[dict]) -> bytes:
        buffer = io.StringIO()
        if record:
            writer = csv.DictWriter(buffer, fieldnames=list(record[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(record)
        return buffer.getvalue().encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> List[dict]:
        return list(csv.DictReader(io.StringIO(payload.decode("utf-8"))))
