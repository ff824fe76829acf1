"""
Content digests recorded in run metadata
"""
import hashlib
from pathlib import Path
from typing import Union


def blob_digest(content: bytes) -> str:
    """Git blob id: sha1 over 'blob <len>\\0' + content"""
    hasher = hashlib.sha1()
    hasher.update(f"blob {len(content)}\0".encode("ascii"))
    hasher.update(content)
    return hasher.hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    return blob_digest(Path(path).read_bytes())
