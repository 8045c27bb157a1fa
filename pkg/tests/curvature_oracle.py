"""Symbolic Riemann tensor of r(z)^2 g_M + dz^2 for the test oracles."""

import itertools

import sympy as sp


def warped_metric(r_expr, z, fibre: str, n: int):
    xs = sp.symbols(f"x0:{n}", real=True)
    coords = list(xs) + [z]
    g = sp.zeros(n + 1, n + 1)
    scale = 1
    for i in range(n):
        g[i, i] = r_expr**2 * scale
        if fibre == "sphere":
            scale = scale * sp.sin(xs[i]) ** 2
    g[n, n] = 1
    return coords, g


def christoffel(coords, g):
    dim = len(coords)
    ginv = g.inv()
    gam = [[[0] * dim for _ in range(dim)] for _ in range(dim)]
    for a, b, c in itertools.product(range(dim), repeat=3):
        gam[a][b][c] = sp.simplify(
            sum(ginv[a, d] * (sp.diff(g[d, b], coords[c]) + sp.diff(g[d, c], coords[b]) - sp.diff(g[b, c], coords[d])) for d in range(dim)) / 2
        )
    return gam


def riemann_lower(coords, g, gam):
    """R_abcd = g_ae R^e_bcd with R^a_bcd = d_c Gam^a_db - d_d Gam^a_cb + ..."""
    dim = len(coords)
    up = {}
    for a, b, c, d in itertools.product(range(dim), repeat=4):
        val = sp.diff(gam[a][d][b], coords[c]) - sp.diff(gam[a][c][b], coords[d])
        val += sum(gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b] for e in range(dim))
        up[a, b, c, d] = val
    low = {}
    for a, b, c, d in itertools.product(range(dim), repeat=4):
        low[a, b, c, d] = sp.simplify(sum(g[a, e] * up[e, b, c, d] for e in range(dim)))
    return low


def covariant_riemann(coords, gam, low):
    dim = len(coords)
    out = {}
    for f, a, b, c, d in itertools.product(range(dim), repeat=5):
        val = sp.diff(low[a, b, c, d], coords[f])
        for e in range(dim):
            val -= gam[e][f][a] * low[e, b, c, d]
            val -= gam[e][f][b] * low[a, e, c, d]
            val -= gam[e][f][c] * low[a, b, e, d]
            val -= gam[e][f][d] * low[a, b, c, e]
        out[f, a, b, c, d] = val
    return out


def full_norms(r_expr, z, fibre, n, point):
    """(|R|^2, |nabla R|^2, Ric in frame as (tangent, zz)) with all indices summed."""
    coords, g = warped_metric(r_expr, z, fibre, n)
    gam = christoffel(coords, g)
    low = riemann_lower(coords, g, gam)
    dR = covariant_riemann(coords, gam, low)
    subs = dict(zip(coords, point))
    ginv = [float(g.inv()[i, i].subs(subs)) for i in range(len(coords))]
    dim = len(coords)
    r2 = 0.0
    for a, b, c, d in itertools.product(range(dim), repeat=4):
        v = float(low[a, b, c, d].subs(subs))
        if v:
            r2 += v * v * ginv[a] * ginv[b] * ginv[c] * ginv[d]
    d2 = 0.0
    for f, a, b, c, d in itertools.product(range(dim), repeat=5):
        v = float(dR[f, a, b, c, d].subs(subs))
        if v:
            d2 += v * v * ginv[f] * ginv[a] * ginv[b] * ginv[c] * ginv[d]
    # Ricci R_bd = g^ac R_abcd
    ric = [sum(float(low[a, b, a, b].subs(subs)) * ginv[a] for a in range(dim)) * ginv[b] for b in range(dim)]
    return r2, d2, ric
