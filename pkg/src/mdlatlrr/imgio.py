"""8-bit grayscale image I/O (PNG and binary PGM) and dataset discovery."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError
from .metrics import quantize

IMAGE_SUFFIXES = (".png", ".pgm", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")
WRITE_FORMATS = {".png": "PNG", ".pgm": "PPM"}


def read_image(path) -> np.ndarray:
    """Read an 8-bit grayscale image and map it to [0, 1] by /255."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "1":
                im = im.convert("L")
            elif mode != "L":
                raise DataError(f"{path}: expected an 8-bit grayscale image, got mode {mode!r}")
            data = np.asarray(im, dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"{path}: cannot read image ({exc})") from exc
    return data / 255.0


def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=path.suffix)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_image(path, img) -> None:
    """Clamp, quantise and write ``img`` as an 8-bit PNG or PGM."""
    path = Path(path)
    fmt = WRITE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise DataError(f"{path}: output must be .png or .pgm")
    pil = Image.fromarray(quantize(img), mode="L")
    _atomic_write(path, lambda tmp: pil.save(tmp, format=fmt))


def write_raw(path, **arrays) -> None:
    """Dump float arrays losslessly (.npz) next to the 8-bit exports."""
    path = Path(path)
    if path.suffix != ".npz":
        raise DataError(f"{path}: raw dumps must use the .npz suffix")
    _atomic_write(path, lambda tmp: np.savez(tmp, **arrays))


def rescale_for_display(img) -> np.ndarray:
    """Affine min-max map onto [0, 1]; constant images map to 0."""
    a = np.asarray(img, dtype=np.float64)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not files:
        raise DataError(f"{directory}: no images found")
    return files


def list_images_recursive(directory) -> list[Path]:
    """All images below ``directory``, ordered by relative path."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    files = sorted(
        (p for p in directory.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.relative_to(directory).as_posix(),
    )
    if not files:
        raise DataError(f"{directory}: no images found")
    return files


def find_pairs(dataset) -> list[tuple[str, Path, Path]]:
    """Match ``<dataset>/ir/*`` with ``<dataset>/vis/*`` by file stem."""
    dataset = Path(dataset)
    ir = {p.stem: p for p in list_images(dataset / "ir")}
    vis = {p.stem: p for p in list_images(dataset / "vis")}
    missing = sorted(set(ir) ^ set(vis))
    if missing:
        raise DataError(f"{dataset}: unmatched ir/vis images: {', '.join(missing)}")
    return [(stem, ir[stem], vis[stem]) for stem in sorted(ir)]
