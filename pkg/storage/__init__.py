"""Run artifacts: checkpoints, metrics and content digests"""
from storage.interface import DirectoryRunStorage, InMemoryRunStorage, RunStorage, open_storage

__all__ = ["DirectoryRunStorage", "InMemoryRunStorage", "RunStorage", "open_storage"]
