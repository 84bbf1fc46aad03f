from pathlib import Path
from typing import Generic, List, TypeVar, Union

from .exceptions import CheckpointException
from .logger import logger

RecordType = TypeVar("RecordType")
PathLike = Union[str, Path]


class BaseDAO(Generic[RecordType]):
    """File-per-record store under a root directory; subclasses supply the codec."""

    suffix: str = ""

    @classmethod
    def path(cls, root: PathLike, key: str) -> Path:
        return Path(root) / f"{key}{cls.suffix}"

    @classmethod
    def encode(cls, record: RecordType) -> bytes:
        raise NotImplementedError

    @classmethod
    def decode(cls, payload: bytes) -> RecordType:
        raise NotImplementedError

    @classmethod
    def save(cls, root: PathLike, key: str, record: RecordType) -> Path:
        path = cls.path(root, key)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(cls.encode(record))
        except OSError as e:
            msg = f"{cls.__name__}: cannot write {path}: {e.strerror or e}"
            logger.error(msg)
            raise CheckpointException(msg) from e
        return path

    @classmethod
    def load(cls, root: PathLike, key: str) -> RecordType:
        return cls.load_path(cls.path(root, key))

    @classmethod
    def load_path(cls, path: PathLike) -> RecordType:
        path = Path(path)
        try:
            payload = path.read_bytes()
        except OSError as e:
            msg = f"{cls.__name__}: cannot read {path}: {e.strerror or e}"
            logger.error(msg)
            raise CheckpointException(msg) from e
        return cls.decode(payload)

    @classmethod
    def exists(cls, root: PathLike, key: str) -> bool:
        return cls.path(root, key).is_file()

    @classmethod
    def find_all(cls, root: PathLike) -> List[str]:
        root = Path(root)
        if not root.is_dir():
            return []
        return sorted(p.name[: len(p.name) - len(cls.suffix)] for p in root.glob(f"*{cls.suffix}") if p.is_file())
