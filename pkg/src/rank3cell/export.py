"""Plain-file exports of density fields, tensors and iteration logs."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .unitcell import DensityField, ParallelogramCell

OUTLINE_GRAY = 128


def to_gray(rho: np.ndarray, invert: bool = False) -> np.ndarray:
    """8-bit gray levels, 0 = void. Rows are flipped so the image's top row is the cell's top."""
    g = np.rint(np.clip(np.asarray(rho, dtype=float), 0.0, 1.0) * 255).astype(np.uint8)
    if invert:
        g = 255 - g
    return g[::-1]


def write_pgm(path, image: np.ndarray) -> None:
    """Binary (P5) graymap with maxval 255, rows written top to bottom."""
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise ValueError("only binary 8-bit graymaps are supported")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)


def write_field_pgm(path, field: DensityField, invert: bool = False) -> None:
    write_pgm(path, to_gray(field.rho, invert))


def write_field_csv(path, field: DensityField) -> None:
    """Header ``nx,ny`` followed by ny rows of nx densities (row j = parametric row j)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{field.nx},{field.ny}\n")
        for row in field.rho:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_field_csv(path, cell: ParallelogramCell | None = None) -> DensityField:
    with open(path) as fh:
        nx, ny = (int(x) for x in fh.readline().split(","))
        rho = np.array([[float(x) for x in line.split(",")] for line in fh if line.strip()])
    if rho.shape != (ny, nx):
        raise ValueError(f"expected {ny}x{nx} values, got {rho.shape}")
    return DensityField(rho, cell or ParallelogramCell.unit_square())


def tiled_image(field: DensityField, tiles: int = 2, pixels: int | None = None,
                invert: bool = False) -> np.ndarray:
    """Gray image of a tiles-by-tiles physical window with the unit cell outlined.

    The window is the square [0, tiles * s]^2 with s the side of a unit-area
    square; each pixel samples the periodic field at its physical location.
    The cell at the origin is outlined at 50% gray.
    """
    cell = field.cell
    pixels = pixels or tiles * max(field.nx, field.ny)
    side = tiles * np.sqrt(abs(cell.area))
    c = (np.arange(pixels) + 0.5) / pixels * side
    x, y = np.meshgrid(c, c[::-1], indexing="xy")
    uv = np.linalg.solve(cell.basis, np.stack([x.ravel(), y.ravel()]))
    u, v = uv
    i = np.floor(np.mod(u, 1.0) * field.nx).astype(int) % field.nx
    j = np.floor(np.mod(v, 1.0) * field.ny).astype(int) % field.ny
    g = np.rint(np.clip(field.rho[j, i], 0, 1) * 255).astype(np.uint8)
    if invert:
        g = 255 - g
    g = g.reshape(pixels, pixels)

    # outline: points near an edge of the cell spanned at the origin
    du = np.abs(np.linalg.norm(cell.a2) / (abs(cell.area))) * side / pixels  # one pixel in u
    dv = np.abs(np.linalg.norm(cell.a1) / (abs(cell.area))) * side / pixels
    inside = (u >= -du) & (u <= 1 + du) & (v >= -dv) & (v <= 1 + dv)
    edge = inside & ((np.abs(u) <= du) | (np.abs(u - 1) <= du) | (np.abs(v) <= dv) | (np.abs(v - 1) <= dv))
    g.ravel()[edge] = OUTLINE_GRAY
    return g


def write_tiled_pgm(path, field: DensityField, tiles: int = 2, invert: bool = False) -> None:
    write_pgm(path, tiled_image(field, tiles, invert=invert))


def write_tensor_csv(path, tensor: np.ndarray) -> None:
    np.savetxt(path, np.asarray(tensor), delimiter=",", fmt="%.17g")


def write_log_csv(path, history) -> None:
    """Iteration log with columns iter, beta, objective, volume, max_design_change."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "beta", "objective", "volume", "max_design_change"])
        for rec in history:
            writer.writerow([rec.iteration, repr(rec.beta), repr(rec.objective), repr(rec.volume),
                             repr(rec.change)])
