"""Regenerate crates/kirigami/src/dataset/sobol_table.rs from scipy's bundled
Joe-Kuo direction numbers, and print reference points for the tests."""
import os
import sys

import numpy as np
import scipy.stats
from scipy.stats import qmc

DIMS = 1024


def load():
    path = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
    d = np.load(path)
    return d["poly"][:DIMS], d["vinit"][:DIMS]


def directions(poly, vinit, bits=32):
    out = []
    for dim in range(len(poly)):
        v = [0] * bits
        if dim == 0:
            for j in range(bits):
                v[j] = 1 << (bits - 1 - j)
        else:
            p = int(poly[dim])
            s = p.bit_length() - 1
            for j in range(s):
                v[j] = int(vinit[dim][j]) << (bits - 1 - j)
            for j in range(s, bits):
                nv = v[j - s] ^ (v[j - s] >> s)
                for k in range(1, s):
                    if (p >> (s - k)) & 1:
                        nv ^= v[j - k]
                v[j] = nv
        out.append(v)
    return out


def points(v, n, dim):
    x = [0] * dim
    res = []
    for i in range(n):
        res.append([a / 2.0**32 for a in x])
        c = (~i & (i + 1)).bit_length() - 1
        for d in range(dim):
            x[d] ^= v[d][c]
    return res


def main():
    poly, vinit = load()
    v = directions(poly, vinit)
    ref = qmc.Sobol(8, scramble=False).random_base2(6)
    mine = np.array(points(v, 64, 8))
    assert np.array_equal(ref, mine), "recurrence disagrees with scipy"
    if len(sys.argv) > 1 and sys.argv[1] == "check":
        hi = qmc.Sobol(DIMS, scramble=False).random_base2(4)
        print(np.array_equal(hi, np.array(points(v, 16, DIMS))))
        return
    lines = [
        "// Generated by tools/sobol_table.py. Joe-Kuo direction numbers (new-joe-kuo-6.21201).",
        "// Each entry: (primitive polynomial with leading and trailing bits, initial m values).",
        "",
        f"pub const MAX_DIM: usize = {DIMS};",
        "",
        f"pub static TABLE: [(u32, &[u32]); {DIMS}] = [",
    ]
    for dim in range(DIMS):
        p = int(poly[dim])
        s = max(p.bit_length() - 1, 0)
        m = ", ".join(str(int(a)) for a in vinit[dim][:s]) if dim > 0 else ""
        lines.append(f"    ({p}, &[{m}]),")
    lines.append("];")
    print("\n".join(lines))


if __name__ == "__main__":
    main()
