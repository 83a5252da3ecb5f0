#!/usr/bin/env python3
"""Convert a LASA handwriting .mat file into the demonstration CSV schema.

Output columns: demo_id,t,x1..xn,v1..vn (raw millimetre units, seconds).

    python3 tools/convert_lasa.py Sine.mat data/lasa/sine.csv --stride 10

The .mat files ship with the LASA handwriting dataset distribution and with
older pyLasaDataset wheels (pyLasaDataset/resources/.../DataSet/*.mat).
"""

import argparse
import csv

import scipy.io as sio


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("mat", help="path to a LASA <Shape>.mat file")
    parser.add_argument("out", help="output CSV path")
    parser.add_argument("--stride", type=int, default=1,
                        help="keep every k-th sample (the last sample is always kept)")
    args = parser.parse_args()

    demos = sio.loadmat(args.mat)["demos"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        dim = demos[0, 0][0, 0]["pos"].shape[0]
        writer.writerow(["demo_id", "t"] + [f"x{i + 1}" for i in range(dim)]
                        + [f"v{i + 1}" for i in range(dim)])
        for i in range(demos.shape[1]):
            entry = demos[0, i][0, 0]
            pos, vel, t = entry["pos"], entry["vel"], entry["t"][0]
            count = pos.shape[1]
            keep = list(range(0, count, args.stride))
            if keep[-1] != count - 1:
                keep.append(count - 1)
            for j in keep:
                writer.writerow([i] + [repr(float(t[j]))]
                                + [repr(float(pos[k, j])) for k in range(dim)]
                                + [repr(float(vel[k, j])) for k in range(dim)])


if __name__ == "__main__":
    main()
