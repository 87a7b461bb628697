"""Minimal NIfTI-1 reader/writer for uncompressed 3-D volumes.

Supports single-file ``n+1`` images and ``ni1`` header/image pairs, either
byte order (detected from ``sizeof_hdr``), and the datatypes uint8 (2),
int16 (4) and float32 (16). Voxels are returned as float64 after applying
``scl_slope``/``scl_inter`` when the slope is non-zero.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import (BadMagicError, ContractError, NiftiError, TruncatedError,
                      UnsupportedDatatypeError)

HEADER_SIZE = 348
SINGLE_FILE_OFFSET = 352

DATATYPES = {2: np.dtype("u1"), 4: np.dtype("i2"), 16: np.dtype("f4")}
DATATYPE_NAMES = {2: "uint8", 4: "int16", 16: "float32"}

# (name, struct code, offset) for the fields we read or write
_FIELDS = {
    "sizeof_hdr": ("i", 0),
    "dim": ("8h", 40),
    "datatype": ("h", 70),
    "bitpix": ("h", 72),
    "pixdim": ("8f", 76),
    "vox_offset": ("f", 108),
    "scl_slope": ("f", 112),
    "scl_inter": ("f", 116),
    "xyzt_units": ("B", 123),
    "descrip": ("80s", 148),
    "qform_code": ("h", 252),
    "sform_code": ("h", 254),
    "magic": ("4s", 344),
}


@dataclass
class Volume:
    """A 3-D volume; ``voxels`` is flat with x fastest, then y, then z."""

    dims: tuple
    spacing: tuple
    voxels: np.ndarray
    kind: str = "intensity"
    datatype: int = 16
    scl_slope: float = 0.0
    scl_inter: float = 0.0
    byteorder: str = "<"
    descrip: bytes = b""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if self.voxels.size != nx * ny * nz:
            raise ContractError(
                f"volume has {self.voxels.size} voxels, dims {self.dims} need {nx * ny * nz}")
        if self.kind not in ("intensity", "label"):
            raise ContractError(f"unknown volume kind {self.kind!r}")

    def array(self) -> np.ndarray:
        """View as ``(nz, ny, nx)``."""
        nx, ny, nz = self.dims
        return self.voxels.reshape(nz, ny, nx)


def _read(buf, name, bo):
    code, off = _FIELDS[name]
    vals = struct.unpack_from(bo + code, buf, off)
    return vals if len(vals) > 1 else vals[0]


def _detect_byteorder(buf) -> str:
    if struct.unpack_from("<i", buf, 0)[0] == HEADER_SIZE:
        return "<"
    if struct.unpack_from(">i", buf, 0)[0] == HEADER_SIZE:
        return ">"
    raise BadMagicError("sizeof_hdr is not 348 in either byte order", field="sizeof_hdr")


def read_header(data: bytes) -> dict:
    """Decode the header fields used by :func:`parse_nifti`."""
    if len(data) < HEADER_SIZE:
        raise TruncatedError(f"header needs {HEADER_SIZE} bytes, got {len(data)}",
                             field="sizeof_hdr")
    bo = _detect_byteorder(data)
    hdr = {name: _read(data, name, bo) for name in _FIELDS}
    hdr["byteorder"] = bo
    magic = hdr["magic"]
    if magic not in (b"n+1\0", b"ni1\0"):
        raise BadMagicError(f"bad magic {magic!r}", field="magic")
    ndim = hdr["dim"][0]
    if not 1 <= ndim <= 7:
        raise NiftiError(f"dim[0] = {ndim} is out of range", field="dim")
    if any(d > 1 for d in hdr["dim"][4:ndim + 1]):
        raise NiftiError(f"only 3-D volumes are supported, dim = {hdr['dim']}", field="dim")
    if hdr["datatype"] not in DATATYPES:
        raise UnsupportedDatatypeError(
            f"datatype {hdr['datatype']} is not supported (use 2, 4 or 16)", field="datatype")
    return hdr


def parse_nifti(data: bytes, image: bytes | None = None, kind: str = "intensity") -> Volume:
    """Decode a NIfTI-1 volume.

    ``data`` is the ``.nii`` file, or the ``.hdr`` file when ``image``
    carries the matching ``.img`` payload.
    """
    if image is None and len(data) < SINGLE_FILE_OFFSET:
        raise TruncatedError(f"file needs at least {SINGLE_FILE_OFFSET} bytes, got {len(data)}",
                             field="sizeof_hdr")
    hdr = read_header(data)
    bo = hdr["byteorder"]
    dim = hdr["dim"]
    ndim = dim[0]
    dims = tuple(int(dim[i]) if i <= ndim else 1 for i in (1, 2, 3))
    if min(dims) < 1:
        raise NiftiError(f"non-positive dimension in {dims}", field="dim")
    spacing = tuple(float(hdr["pixdim"][i]) for i in (1, 2, 3))
    dtype = DATATYPES[hdr["datatype"]].newbyteorder(bo)
    offset = int(hdr["vox_offset"])
    if hdr["magic"] == b"n+1\0":
        if offset < SINGLE_FILE_OFFSET:
            raise NiftiError(f"vox_offset {offset} is inside the header", field="vox_offset")
        payload = data
    else:
        if image is None:
            raise NiftiError("ni1 header needs a separate image payload", field="magic")
        payload = image
    count = dims[0] * dims[1] * dims[2]
    end = offset + count * dtype.itemsize
    if len(payload) < end:
        raise TruncatedError(
            f"voxel data needs {end} bytes, payload has {len(payload)}", field="vox_offset")
    raw = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
    voxels = raw.astype(np.float64)
    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if slope != 0.0 and np.isfinite(slope):
        voxels = voxels * slope + inter
    return Volume(dims, spacing, voxels, kind=kind, datatype=hdr["datatype"],
                  scl_slope=slope, scl_inter=inter, byteorder=bo,
                  descrip=hdr["descrip"].rstrip(b"\0"))


def write_nifti(vol: Volume, datatype: int | None = None, byteorder: str | None = None) -> bytes:
    """Encode ``vol`` as a single-file ``n+1`` image.

    Stored values are ``(voxel - scl_inter) / scl_slope`` when the slope is
    non-zero; integer types are rounded to nearest.
    """
    datatype = vol.datatype if datatype is None else datatype
    bo = vol.byteorder if byteorder is None else byteorder
    if datatype not in DATATYPES:
        raise UnsupportedDatatypeError(f"datatype {datatype} is not supported", field="datatype")
    dtype = DATATYPES[datatype].newbyteorder(bo)
    raw = vol.voxels
    if vol.scl_slope != 0.0:
        raw = (raw - vol.scl_inter) / vol.scl_slope
    if dtype.kind in "iu":
        raw = np.rint(raw)
        info = np.iinfo(dtype)
        if raw.min() < info.min or raw.max() > info.max:
            raise ContractError(f"voxel values do not fit {DATATYPE_NAMES[datatype]}")
    buf = bytearray(SINGLE_FILE_OFFSET)
    nx, ny, nz = vol.dims

    def put(name, *vals):
        code, off = _FIELDS[name]
        struct.pack_into(bo + code, buf, off, *vals)

    put("sizeof_hdr", HEADER_SIZE)
    put("dim", 3, nx, ny, nz, 1, 1, 1, 1)
    put("datatype", datatype)
    put("bitpix", dtype.itemsize * 8)
    put("pixdim", 1.0, *vol.spacing, 0.0, 0.0, 0.0, 0.0)
    put("vox_offset", float(SINGLE_FILE_OFFSET))
    put("scl_slope", vol.scl_slope)
    put("scl_inter", vol.scl_inter)
    put("xyzt_units", 2)  # millimetres
    put("descrip", vol.descrip[:80])
    put("magic", b"n+1\0")
    return bytes(buf) + raw.astype(dtype).tobytes()


def header_summary(data: bytes) -> dict:
    """Human-oriented header fields, as printed by ``nifti-info``."""
    hdr = read_header(data)
    ndim = hdr["dim"][0]
    return {
        "byteorder": "little" if hdr["byteorder"] == "<" else "big",
        "magic": hdr["magic"].rstrip(b"\0").decode("ascii"),
        "dims": tuple(hdr["dim"][1:ndim + 1]),
        "spacing": tuple(round(v, 6) for v in hdr["pixdim"][1:ndim + 1]),
        "datatype": f"{DATATYPE_NAMES[hdr['datatype']]} ({hdr['datatype']})",
        "bitpix": hdr["bitpix"],
        "vox_offset": hdr["vox_offset"],
        "scl_slope": hdr["scl_slope"],
        "scl_inter": hdr["scl_inter"],
        "descrip": hdr["descrip"].rstrip(b"\0").decode("ascii", "replace"),
    }
