from typing import List

import numpy as np

from ..dao import BaseDAO
from ..exceptions import CheckpointException


class FrameDAO(BaseDAO[np.ndarray]):
    """Binary 8-bit PPM (P6) frames."""

    suffix = ".ppm"

    @classmethod
    def encode(cls, record: np.ndarray) -> bytes:
        frame = np.asarray(record)
        if frame.dtype != np.uint8 or frame.ndim != 3 or frame.shape[-1] != 3:
            raise CheckpointException(f"PPM frames must be uint8 [H, W, 3], got {frame.dtype} {frame.shape}")
        height, width, _ = frame.shape
        return b"P6\n%d %d\n255\n" % (width, height) + np.ascontiguousarray(frame).tobytes()

    @classmethod
    def decode(cls, payload: bytes) -> np.ndarray:
        fields, offset = [], 0
        while len(fields) < 4:
            while offset < len(payload) and payload[offset : offset + 1].isspace():
                offset += 1
            if payload[offset : offset + 1] == b"#":
                offset = payload.index(b"\n", offset) + 1
                continue
            end = offset
            while end < len(payload) and not payload[end : end + 1].isspace():
                end += 1
            if end == offset:
                raise CheckpointException("truncated PPM header")
            fields.append(payload[offset:end])
            offset = end
        if fields[0] != b"P6" or fields[3] != b"255":
            raise CheckpointException(f"unsupported PPM header {fields[0]!r} maxval {fields[3]!r}")
        width, height = int(fields[1]), int(fields[2])
        data = payload[offset + 1 : offset + 1 + width * height * 3]
        if len(data) != width * height * 3:
            raise CheckpointException(f"PPM payload has {len(data)} bytes, expected {width * height * 3}")
        return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()


class CaptionDAO(BaseDAO[List[str]]):
    """One UTF-8 line of space-separated caption tokens."""

    suffix = ".txt"

    @classmethod
    def encode(cls, record: List[str]) -> bytes:
        return (" ".join(record) + "\n").encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> List[str]:
        return payload.decode("utf-8").split()


def save_video(root, frames: np.ndarray) -> List[str]:
    return [str(FrameDAO.save(root, f"frame_{k:04d}", frame)) for k, frame in enumerate(frames)]


def load_video(root) -> np.ndarray:
    keys = [k for k in FrameDAO.find_all(root) if k.startswith("frame_")]
    if not keys:
        raise CheckpointException(f"no frame_*.ppm files under {root}")
    return np.stack([FrameDAO.load(root, k) for k in keys])
