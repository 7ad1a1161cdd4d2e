"""Regenerate the bundled polar tables in src/vpquad/data/.

Both tables are synthetic reconstructions at Re = 100,000 pinned to the
anchors the downstream model depends on:

  symmetric: cl(0) = 0, lift slope 0.1/deg pre-stall, cd = 0.01 at cl = 0
  cambered:  cl = 0 at alpha = -1.8 deg, same slope, cd = 0.045 at cl = 0,
             drag converging to the symmetric curve within 15% for cl >= 0.6

Drag uses a quadratic polar cd(cl) = cd0 + k (cl - cl_mincd)^2 plus a
post-stall penalty in alpha.  Run from the repo root:

    python tools/make_polars.py
"""

import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "vpquad" / "data"

ALPHA = np.arange(-25.0, 25.0 + 0.25, 0.5)
SLOPE = 0.1  # cl per degree

SYM_STALL = 11.0
CAM_ALPHA0 = -1.8
CAM_STALL_POS = 10.5
CAM_STALL_NEG = -13.0
POST_STALL_CL = 0.025  # cl rolloff per degree past stall
POST_STALL_CD = 0.002  # extra cd per squared degree past stall


def sym_cl(a):
    s = np.sign(a)
    lin = SLOPE * a
    stalled = s * (SLOPE * SYM_STALL - POST_STALL_CL * (np.abs(a) - SYM_STALL))
    return np.where(np.abs(a) <= SYM_STALL, lin, stalled)


def sym_cd(a):
    cl = sym_cl(a)
    cd = 0.01 + 0.04 * cl * cl
    over = np.maximum(np.abs(a) - SYM_STALL, 0.0)
    return cd + POST_STALL_CD * over * over


def cam_cl(a):
    lin = SLOPE * (a - CAM_ALPHA0)
    hi = SLOPE * (CAM_STALL_POS - CAM_ALPHA0) - POST_STALL_CL * (a - CAM_STALL_POS)
    lo = SLOPE * (CAM_STALL_NEG - CAM_ALPHA0) + POST_STALL_CL * (CAM_STALL_NEG - a)
    return np.where(a > CAM_STALL_POS, hi, np.where(a < CAM_STALL_NEG, lo, lin))


def cam_cd(a):
    # quadratic through cd(cl=0) = 0.045 that meets the symmetric curve
    # near cl = 0.7 and 1.1 (keeps the two within 15% for cl >= 0.6)
    cl = cam_cl(a)
    cd = 0.045 - 0.0818 * cl + 0.08545 * cl * cl
    over = np.maximum(a - CAM_STALL_POS, 0.0) + np.maximum(CAM_STALL_NEG - a, 0.0)
    return cd + POST_STALL_CD * over * over


def write(path, alpha, cl, cd, header):
    lines = [header]
    lines.append("# alpha_deg      cl          cd")
    for a, l, d in zip(alpha, cl, cd):
        lines.append("%8.2f  %10.6f  %10.6f" % (a, l, d))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("wrote", path)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write(
        OUT / "symmetric.pol",
        ALPHA,
        sym_cl(ALPHA),
        sym_cd(ALPHA),
        "# symmetric airfoil polar, Re = 100000",
    )
    write(
        OUT / "cambered.pol",
        ALPHA,
        cam_cl(ALPHA),
        cam_cd(ALPHA),
        "# cambered airfoil polar, Re = 100000",
    )


if __name__ == "__main__":
    main()
