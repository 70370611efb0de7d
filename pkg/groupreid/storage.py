"""
On-disk formats.

    checkpoint  b"GRCK" | u32 version | u32 len + ModelSpec JSON | u32 count |
                per tensor: u32 name len, name, u32 rank, u32 extents, f64 data
    matrix      b"GRMX" | u32 version | u32 rows | u32 cols | f64 data
    dataset     directory with manifest.json and one <split>.f32 blob per split

All integers and floats are little-endian; arrays are row-major.
"""

import json
import logging
import struct
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .config import SCHEMA_VERSION, ModelSpec, SynthSpec
from .data import ReidDataset, SplitArrays
from .exceptions import CheckpointFormatError, ConfigurationError
from .model import ReidModel


logger = logging.getLogger('groupreid')

PathLike = Union[str, Path]

CHECKPOINT_MAGIC = b'GRCK'
CHECKPOINT_VERSION = 1
MATRIX_MAGIC = b'GRMX'
MATRIX_VERSION = 1
DATASET_MAGIC = 'GRDS'
DATASET_VERSION = 1
MANIFEST_NAME = 'manifest.json'

_U32 = struct.Struct('<I')


class _Reader:
    """Sequential reader over a byte buffer that reports truncation."""

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CheckpointFormatError(
                f"{self.source} is truncated: needed {size} bytes at offset {self.offset}, "
                f"file has {len(self.data)}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def float64(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.take(8 * count), dtype='<f8').reshape(shape).astype(np.float64)

    def expect_end(self) -> None:
        if self.offset != len(self.data):
            raise CheckpointFormatError(
                f"{self.source} has {len(self.data) - self.offset} unexpected trailing bytes"
            )


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"cannot read {path}: {e}", original_error=e)


def _write_bytes(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise ConfigurationError(f"cannot write {path}: {e}")


def _check_header(reader: _Reader, magic: bytes, version: int) -> None:
    found = reader.take(len(magic))
    if found != magic:
        raise CheckpointFormatError(f"{reader.source}: bad magic {found!r}, expected {magic!r}")
    found_version = reader.u32()
    if found_version != version:
        raise CheckpointFormatError(
            f"{reader.source}: unsupported format version {found_version} (expected {version})"
        )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def encode_checkpoint(model: ReidModel) -> bytes:
    spec_json = json.dumps(model.spec.to_dict(), sort_keys=True).encode('utf-8')
    state = model.state_dict()
    parts = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_VERSION), _U32.pack(len(spec_json)), spec_json,
             _U32.pack(len(state))]
    for name in sorted(state):
        tensor = np.ascontiguousarray(state[name], dtype='<f8')
        encoded = name.encode('utf-8')
        parts.append(_U32.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_U32.pack(tensor.ndim))
        parts.extend(_U32.pack(extent) for extent in tensor.shape)
        parts.append(tensor.tobytes())
    return b''.join(parts)


def decode_checkpoint(payload: bytes, source: str = 'checkpoint') -> Tuple[ModelSpec, Dict[str, np.ndarray]]:
    reader = _Reader(payload, source)
    _check_header(reader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    try:
        spec = ModelSpec.from_dict(json.loads(reader.take(reader.u32()).decode('utf-8')))
    except (UnicodeDecodeError, json.JSONDecodeError, ConfigurationError) as e:
        raise CheckpointFormatError(f"{source}: invalid model spec: {e}", original_error=e)

    state: Dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode('utf-8', errors='replace')
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        state[name] = reader.float64(shape)
    reader.expect_end()
    return spec, state


def save_checkpoint(model: ReidModel, path: PathLike) -> Path:
    """Write the model's spec, parameters and running statistics."""
    _write_bytes(path, encode_checkpoint(model))
    logger.debug(f"[groupreid] checkpoint written to {path}")
    return Path(path)


def load_checkpoint(path: PathLike) -> ReidModel:
    """
    Rebuild a model from a checkpoint.

    Raises:
        CheckpointFormatError: On bad magic or version, truncation, or
                               tensors that do not fit the stored spec.
    """
    spec, state = decode_checkpoint(_read_bytes(path), str(path))
    model = ReidModel(spec)
    model.load_state_dict(state)
    return model


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """Write a 2-D float64 matrix with its (rows, cols) header."""
    matrix = np.ascontiguousarray(matrix, dtype='<f8')
    if matrix.ndim != 2:
        raise ConfigurationError(f"only 2-D matrices can be written, got shape {matrix.shape}")
    rows, cols = matrix.shape
    _write_bytes(path, MATRIX_MAGIC + _U32.pack(MATRIX_VERSION) + _U32.pack(rows) + _U32.pack(cols)
                 + matrix.tobytes())
    return Path(path)


def read_matrix(path: PathLike) -> np.ndarray:
    reader = _Reader(_read_bytes(path), str(path))
    _check_header(reader, MATRIX_MAGIC, MATRIX_VERSION)
    rows, cols = reader.u32(), reader.u32()
    matrix = reader.float64((rows, cols))
    reader.expect_end()
    return matrix


def write_features(
    path: PathLike,
    features: np.ndarray,
    rows: List[Dict[str, Any]],
    setting: str,
) -> Tuple[Path, Path]:
    """
    Write a descriptor matrix plus its JSON sidecar `<path>.json`.

    Args:
        rows: One {'split', 'identity', 'camera'} record per matrix row.
    """
    if len(rows) != features.shape[0]:
        raise ConfigurationError(f"{len(rows)} row records for {features.shape[0]} feature rows")
    matrix_path = write_matrix(path, features)
    sidecar = Path(f'{path}.json')
    document = {
        'schema_version': SCHEMA_VERSION,
        'setting': setting,
        'descriptor_dim': int(features.shape[1]),
        'rows': rows,
    }
    _write_bytes(sidecar, (json.dumps(document, sort_keys=True) + '\n').encode('utf-8'))
    return matrix_path, sidecar


def read_features(path: PathLike) -> Tuple[np.ndarray, Dict[str, Any]]:
    matrix = read_matrix(path)
    sidecar = _read_bytes(f'{path}.json')
    try:
        document = json.loads(sidecar.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}.json is not valid JSON: {e}", original_error=e)
    if len(document.get('rows', [])) != matrix.shape[0]:
        raise CheckpointFormatError(f"{path}.json does not describe the {matrix.shape[0]} matrix rows")
    return matrix, document


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

def save_dataset(dataset: ReidDataset, directory: PathLike) -> Path:
    """Write every split as raw float32 images plus a JSON manifest."""
    directory = Path(directory)
    height, width = dataset.spec.image_hw
    manifest: Dict[str, Any] = {
        'schema_version': SCHEMA_VERSION,
        'magic': DATASET_MAGIC,
        'version': DATASET_VERSION,
        'image_shape': [3, height, width],
        'seed': dataset.spec.seed,
        'spec': asdict(dataset.spec),
        'splits': {},
    }
    for name, split in dataset.splits().items():
        filename = f'{name}.f32'
        _write_bytes(directory / filename, np.ascontiguousarray(split.images, dtype='<f4').tobytes())
        manifest['splits'][name] = {
            'file': filename,
            'count': len(split),
            'identities': split.identities.tolist(),
            'cameras': split.cameras.tolist(),
        }
    _write_bytes(directory / MANIFEST_NAME, (json.dumps(manifest, indent=2, sort_keys=True) + '\n').encode('utf-8'))
    logger.info(f"[groupreid] dataset written to {directory}")
    return directory


def load_dataset(directory: PathLike) -> ReidDataset:
    """
    Read a dataset directory written by save_dataset.

    Raises:
        CheckpointFormatError: If the manifest or a blob is missing,
                               malformed or of the wrong size.
    """
    directory = Path(directory)
    try:
        manifest = json.loads(_read_bytes(directory / MANIFEST_NAME).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{directory / MANIFEST_NAME} is not valid JSON: {e}", original_error=e)
    if manifest.get('magic') != DATASET_MAGIC or manifest.get('version') != DATASET_VERSION:
        raise CheckpointFormatError(
            f"{directory} is not a version-{DATASET_VERSION} dataset directory "
            f"(magic {manifest.get('magic')!r}, version {manifest.get('version')!r})"
        )
    try:
        spec = SynthSpec(**manifest['spec'])
        image_shape = tuple(manifest['image_shape'])
        split_entries = manifest['splits']
    except (KeyError, TypeError, ConfigurationError) as e:
        raise CheckpointFormatError(f"{directory}: malformed manifest: {e}", original_error=e)

    splits: Dict[str, SplitArrays] = {}
    for name in ('train', 'val', 'query', 'gallery'):
        entry = split_entries.get(name)
        if entry is None:
            raise CheckpointFormatError(f"{directory}: manifest has no '{name}' split")
        blob = _read_bytes(directory / entry['file'])
        expected = entry['count'] * int(np.prod(image_shape)) * 4
        if len(blob) != expected:
            raise CheckpointFormatError(
                f"{directory / entry['file']} holds {len(blob)} bytes, expected {expected}"
            )
        images = np.frombuffer(blob, dtype='<f4').reshape((entry['count'],) + image_shape)
        splits[name] = SplitArrays(
            name=name,
            images=images.astype(np.float64),
            identities=np.asarray(entry['identities'], dtype=np.int64),
            cameras=np.asarray(entry['cameras'], dtype=np.int64),
        )

    dataset = ReidDataset(spec=spec, **splits)
    dataset.check_disjoint()
    return dataset
