"""Image, CSV and report serialization.

Grayscale PNG (8/16-bit) and single- or multi-page TIFF are the supported
image formats; multi-page TIFF carries the third axis (z for volumes, time
for sequences, depending on the command). All writers go through an atomic
replace so a crash never leaves a truncated file behind.
"""

from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile

import numpy as np
import tifffile
from PIL import Image

from .fields import CoverageStats
from .testing import TestReport

PNG_EXTS = (".png",)
TIFF_EXTS = (".tif", ".tiff")


def _atomic_write(path, writer) -> None:
    """Run ``writer(tmp_path)`` and atomically move the result into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    suffix = os.path.splitext(path)[1]
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=suffix)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.remove(tmp)
        raise


def _ext(path) -> str:
    return os.path.splitext(os.fspath(path))[1].lower()


def load_image(path) -> np.ndarray:
    """Read a grayscale image or volume.

    PNG gives a 2D array in the file's bit depth. TIFF gives 2D for a single
    page and (pages, rows, cols) otherwise. Color images are rejected:
    channels are tested one at a time, so split them upstream.
    """
    ext = _ext(path)
    if ext in PNG_EXTS:
        with Image.open(path) as img:
            if img.mode in ("RGB", "RGBA", "CMYK", "YCbCr", "LAB", "HSV"):
                raise ValueError(
                    f"{path}: color images are not supported, "
                    "provide one single-channel image per protein"
                )
            if img.mode == "P":
                img = img.convert("L")
            return np.asarray(img)
    if ext in TIFF_EXTS:
        arr = tifffile.imread(path)
        if arr.ndim == 3 and arr.shape[0] == 1:
            arr = arr[0]
        if arr.ndim not in (2, 3):
            raise ValueError(f"{path}: expected 2 or 3 axes, got {arr.ndim}")
        return np.asarray(arr)
    raise ValueError(f"{path}: unsupported extension {ext!r}, use PNG or TIFF")


def load_mask(path) -> np.ndarray:
    """Read an image and binarize it: any nonzero value is foreground."""
    return load_image(path) != 0


def load_frames(path) -> list[np.ndarray]:
    """Read a time sequence: one frame per TIFF page (a 2D file is one frame)."""
    arr = load_image(path)
    if arr.ndim == 2:
        return [arr]
    return [arr[t] for t in range(arr.shape[0])]


def save_mask(path, mask: np.ndarray) -> None:
    """Write a boolean mask, 0/255: 8-bit PNG in 2D, uint8 multipage TIFF in 3D."""
    mask = np.asarray(mask)
    out = (mask.astype(np.uint8)) * np.uint8(255)
    ext = _ext(path)
    if ext in PNG_EXTS:
        if mask.ndim != 2:
            raise ValueError("PNG holds a single 2D mask, use TIFF for volumes")
        _atomic_write(path, lambda tmp: Image.fromarray(out, mode="L").save(tmp))
    elif ext in TIFF_EXTS:
        _atomic_write(path, lambda tmp: tifffile.imwrite(tmp, out))
    else:
        raise ValueError(f"{path}: unsupported extension, use PNG or TIFF")


def save_image(path, image: np.ndarray) -> None:
    """Write a grayscale intensity image (float32 TIFF, or uint8/uint16 PNG)."""
    image = np.asarray(image)
    ext = _ext(path)
    if ext in TIFF_EXTS:
        arr = image.astype(np.float32) if image.dtype.kind == "f" else image
        _atomic_write(path, lambda tmp: tifffile.imwrite(tmp, arr))
    elif ext in PNG_EXTS:
        if image.ndim != 2:
            raise ValueError("PNG holds a single 2D image, use TIFF for volumes")
        if image.dtype.kind == "f":
            raise ValueError("float images go to TIFF, PNG is integer only")
        _atomic_write(path, lambda tmp: Image.fromarray(image).save(tmp))
    else:
        raise ValueError(f"{path}: unsupported extension, use PNG or TIFF")


def save_score_field(path, scores: np.ndarray) -> None:
    """Write a score field as float32 TIFF (multipage for volumes)."""
    if _ext(path) not in TIFF_EXTS:
        raise ValueError("score fields are float data, use a .tif path")
    _atomic_write(
        path, lambda tmp: tifffile.imwrite(tmp, np.asarray(scores, dtype=np.float32))
    )


def _diverging_palette() -> list[int]:
    # blue -> near-white -> red, symmetric around the middle entry
    lo = np.array([33.0, 102.0, 172.0])
    mid = np.array([247.0, 247.0, 247.0])
    hi = np.array([178.0, 24.0, 43.0])
    flat: list[int] = []
    for i in range(256):
        t = i / 255.0
        rgb = lo + (mid - lo) * (t * 2.0) if t <= 0.5 else mid + (hi - mid) * (
            (t - 0.5) * 2.0
        )
        flat.extend(int(round(c)) for c in rgb)
    return flat


def save_score_preview(path, scores: np.ndarray) -> None:
    """Write an 8-bit diverging-palette PNG preview of a score field.

    The value range is symmetric around zero so the neutral color always
    means "no evidence either way". Volumes are previewed by their middle
    slice.
    """
    if _ext(path) not in PNG_EXTS:
        raise ValueError("previews are PNG")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 3:
        scores = scores[scores.shape[0] // 2]
    if scores.ndim != 2:
        raise ValueError("expected a 2D score field or a volume")
    vmax = float(np.max(np.abs(scores))) or 1.0
    idx = np.clip(
        np.round((scores + vmax) / (2.0 * vmax) * 255.0), 0, 255
    ).astype(np.uint8)
    img = Image.fromarray(idx, mode="P")
    img.putpalette(_diverging_palette())

    _atomic_write(path, lambda tmp: img.save(tmp))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if v != v else f"{v:.9g}"
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    """Write rows of mixed values as CSV, floats at 9 significant digits."""

    def writer(tmp):
        with open(tmp, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(header)
            for row in rows:
                out.writerow([_format_cell(v) for v in row])

    _atomic_write(path, writer)


def write_text(path, text: str) -> None:
    """Write a text file atomically."""

    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)

    _atomic_write(path, writer)


def write_json(path, record: dict) -> None:
    """Write a JSON document atomically."""

    def writer(tmp):
        with open(tmp, "w") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")

    _atomic_write(path, writer)


def report_to_dict(report: TestReport) -> dict:
    return {
        "n": report.stats.n,
        "p1_hat": report.stats.p1_hat,
        "p2_hat": report.stats.p2_hat,
        "p12_hat": report.stats.p12_hat,
        "d_hat": report.stats.d_hat,
        "delta": report.delta,
        "s_hat": report.s_hat,
        "t": report.t,
        "p_bilateral": report.p_bilateral,
        "p_coloc": report.p_coloc,
        "p_anticoloc": report.p_anticoloc,
        "max_lag_used": report.max_lag_used,
        "warnings": list(report.warnings),
    }


def report_from_dict(data: dict) -> TestReport:
    stats = CoverageStats(
        p1_hat=data["p1_hat"],
        p2_hat=data["p2_hat"],
        p12_hat=data["p12_hat"],
        d_hat=data["d_hat"],
        n=data["n"],
    )
    return TestReport(
        stats=stats,
        delta=data["delta"],
        s_hat=data["s_hat"],
        t=data["t"],
        p_bilateral=data["p_bilateral"],
        p_coloc=data["p_coloc"],
        p_anticoloc=data["p_anticoloc"],
        max_lag_used=data["max_lag_used"],
        warnings=tuple(data.get("warnings", ())),
    )


def write_report_json(path, report: TestReport, extra: dict | None = None) -> None:
    """Serialize a report (plus optional extra keys) with full float precision."""
    record = report_to_dict(report)
    if extra:
        record.update(extra)
    write_json(path, record)


def read_report_json(path) -> TestReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))


def fmt_p(p: float) -> str:
    """P-value for display; an exact float zero is below what a normal tail
    can resolve, so print an inequality instead of a misleading 0."""
    return "<1e-15" if p == 0.0 else repr(float(p))


def report_to_text(report: TestReport) -> str:
    lines = [
        f"n={report.stats.n}",
        f"p1_hat={report.stats.p1_hat!r}",
        f"p2_hat={report.stats.p2_hat!r}",
        f"p12_hat={report.stats.p12_hat!r}",
        f"d_hat={report.stats.d_hat!r}",
        f"delta={report.delta!r}",
        f"s_hat={report.s_hat!r}",
        f"t={report.t!r}",
        f"p_bilateral={fmt_p(report.p_bilateral)}",
        f"p_coloc={fmt_p(report.p_coloc)}",
        f"p_anticoloc={fmt_p(report.p_anticoloc)}",
        f"max_lag={report.max_lag_used}",
    ]
    for warning in report.warnings:
        lines.append(f"warning={warning}")
    return "\n".join(lines)
