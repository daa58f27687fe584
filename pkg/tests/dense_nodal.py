"""Independent dense KCL solver used to freeze golden values.

Written directly from the cell geometry with explicit loops; shares no code
with the package. All four resistances must be strictly positive.
"""

import numpy as np


def dense_nodal(g, v_in, r_row, r_col, r_source, r_sense):
    R, C = g.shape
    n = 2 * R * C

    def top(i, j):
        return i * C + j

    def bot(i, j):
        return R * C + i * C + j

    A = np.zeros((n, n))
    b = np.zeros(n)

    def stamp(a, c, cond):
        A[a, a] += cond
        A[c, c] += cond
        A[a, c] -= cond
        A[c, a] -= cond

    for i in range(R):
        # driver side
        k = top(i, 0)
        cond = 1.0 / (r_source + r_row)
        A[k, k] += cond
        b[k] += cond * v_in[i]
        for j in range(C - 1):
            stamp(top(i, j), top(i, j + 1), 1.0 / r_row)
    for j in range(C):
        for i in range(R - 1):
            stamp(bot(i, j), bot(i + 1, j), 1.0 / r_col)
        k = bot(R - 1, j)
        A[k, k] += 1.0 / (r_col + r_sense)
    for i in range(R):
        for j in range(C):
            stamp(top(i, j), bot(i, j), g[i, j])

    v = np.linalg.solve(A, b)
    vt = v[: R * C].reshape(R, C)
    vb = v[R * C:].reshape(R, C)
    # current leaving each column foot into the sense node
    i_col = vb[R - 1, :] / (r_col + r_sense)
    return vt, vb, i_col
