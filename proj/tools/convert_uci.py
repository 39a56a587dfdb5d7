#!/usr/bin/env python3
"""Convert the UCI Character Trajectories file mixoutALL_shifted.mat to the
long-form dataset CSV (series_id,label,v1,v2,v3).

Each trajectory is a 3 x T matrix of pen-tip x/y velocity and force. The
character letter becomes the label. Trailing all-zero columns (padding) are
dropped unless --keep-padding is given.
"""

import argparse
import sys

import numpy as np
import scipy.io


def _letters(consts):
    key = consts["key"][0, 0].ravel()
    return [str(np.asarray(k).ravel()[0]) for k in key]


def load_trajectories(path):
    mat = scipy.io.loadmat(path)
    consts = mat["consts"]
    labels = consts["charlabels"][0, 0].ravel().astype(int)
    letters = _letters(consts)
    series = [np.asarray(m, dtype=float) for m in mat["mixout"].ravel()]
    if len(series) != len(labels):
        raise ValueError(f"{len(series)} trajectories but {len(labels)} labels")
    return [(letters[c - 1], s) for c, s in zip(labels, series)]


def trim_padding(traj):
    nonzero = np.flatnonzero(np.any(traj != 0.0, axis=0))
    return traj[:, : nonzero[-1] + 1] if nonzero.size else traj[:, :0]


def write_csv(out, items, keep_padding=False):
    out.write("series_id,label,v1,v2,v3\n")
    written = 0
    for i, (label, traj) in enumerate(items):
        if traj.ndim != 2 or traj.shape[0] != 3:
            raise ValueError(f"trajectory {i} has shape {traj.shape}, expected 3 x T")
        if not keep_padding:
            traj = trim_padding(traj)
        if traj.shape[1] == 0:
            continue
        sid = f"traj{i + 1:04d}"
        for t in range(traj.shape[1]):
            x, y, p = (float(v) for v in traj[:, t])
            out.write(f"{sid},{label},{x!r},{y!r},{p!r}\n")
        written += 1
    return written


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mat", help="path to mixoutALL_shifted.mat")
    ap.add_argument("csv", help="output CSV path, or - for stdout")
    ap.add_argument("--keep-padding", action="store_true", help="keep trailing zero columns")
    args = ap.parse_args(argv)

    items = load_trajectories(args.mat)
    if args.csv == "-":
        n = write_csv(sys.stdout, items, args.keep_padding)
    else:
        with open(args.csv, "w", newline="") as f:
            n = write_csv(f, items, args.keep_padding)
    print(f"wrote {n} series", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
