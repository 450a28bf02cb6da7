"""Compute reference dispatches for the bundled case files.

Solves a small AC-OPF (series-admittance line model, no charging or taps)
with SLSQP and writes `<case>_ref.csv` (gen_index,p_ref,q_ref in p.u.) and
`<case>_voltages.csv` (bus_index,vm,va in p.u./radians) next to the case.

    python3 scripts/reference_opf.py crates/core/cases/case3.m
"""
import math
import re
import sys

import numpy as np
from scipy.optimize import minimize


def matrix(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def load_case(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.eE+-]+)", text).group(1))
    bus = matrix(text, "bus")
    gen = matrix(text, "gen")
    branch = matrix(text, "branch")
    cost = matrix(text, "gencost")
    return base, bus, gen, branch, cost


def solve(path):
    base, bus, gen, branch, cost = load_case(path)
    ids = [int(b[0]) for b in bus]
    pos = {b: k for k, b in enumerate(ids)}
    nb, ng = len(bus), len(gen)
    slack = [k for k, b in enumerate(bus) if int(b[1]) == 3][0]
    pd = np.array([b[2] for b in bus]) / base
    qd = np.array([b[3] for b in bus]) / base
    vmin = np.array([b[12] for b in bus])
    vmax = np.array([b[11] for b in bus])
    lines = []
    for br in branch:
        y = 1.0 / complex(br[2], br[3])
        ang = min(abs(br[11]), abs(br[12]))
        ang = math.pi / 2 if ang == 0 or ang >= 90 else math.radians(ang)
        rate = br[5] / base if br[5] > 0 else math.inf
        lines.append((pos[int(br[0])], pos[int(br[1])], y, rate, ang))
    coeffs = []
    for c in cost:
        n = int(c[3])
        cs = [0.0] * (3 - n) + c[4 : 4 + n]
        coeffs.append((cs[0] * base * base, cs[1] * base, cs[2]))
    gbus = [pos[int(g[0])] for g in gen]

    def unpack(x):
        return x[:nb], x[nb : 2 * nb], x[2 * nb : 2 * nb + ng], x[2 * nb + ng :]

    def flows(vm, va):
        v = vm * np.exp(1j * va)
        out = []
        for i, j, y, _, _ in lines:
            sij = np.conj(y) * (abs(v[i]) ** 2 - v[i] * np.conj(v[j]))
            sji = np.conj(y) * (abs(v[j]) ** 2 - v[j] * np.conj(v[i]))
            out.append((sij, sji))
        return out

    scale = 1e3

    def objective(x):
        _, _, pg, _ = unpack(x)
        return sum(c2 * p * p + c1 * p + c0 for (c2, c1, c0), p in zip(coeffs, pg)) / scale

    def balance(x):
        vm, va, pg, qg = unpack(x)
        inj = np.zeros(nb, dtype=complex)
        for k, b in enumerate(gbus):
            inj[b] += pg[k] + 1j * qg[k]
        inj -= pd + 1j * qd
        for (i, j, *_), (sij, sji) in zip(lines, flows(vm, va)):
            inj[i] -= sij
            inj[j] -= sji
        return np.concatenate([inj.real, inj.imag, [va[slack]]])

    def inequalities(x):
        vm, va, _, _ = unpack(x)
        out = []
        for (i, j, _, rate, ang), (sij, sji) in zip(lines, flows(vm, va)):
            if math.isfinite(rate):
                out += [rate**2 - abs(sij) ** 2, rate**2 - abs(sji) ** 2]
            out += [ang - (va[i] - va[j]), ang + (va[i] - va[j])]
        return np.array(out)

    bounds = list(zip(vmin, vmax)) + [(-math.pi, math.pi)] * nb
    bounds += [(g[9] / base, g[8] / base) for g in gen]
    bounds += [(g[4] / base, g[3] / base) for g in gen]
    x0 = np.concatenate([np.ones(nb), np.zeros(nb), [(lo + hi) / 2 for lo, hi in bounds[2 * nb :]]])
    res = minimize(
        objective,
        x0,
        method="SLSQP",
        bounds=bounds,
        constraints=[{"type": "eq", "fun": balance}, {"type": "ineq", "fun": inequalities}],
        options={"maxiter": 2000, "ftol": 1e-12},
    )
    if not res.success:
        raise SystemExit(f"{path}: {res.message}")
    vm, va, pg, qg = unpack(res.x)
    lo, hi = zip(*bounds)
    x = np.clip(res.x, lo, hi)
    vm, va, pg, qg = unpack(x)
    va = va - va[slack]
    print(f"{path}: cost {res.fun * scale:.6f}, max balance residual {np.abs(balance(res.x)).max():.2e}")
    stem = path[:-2]
    with open(stem + "_ref.csv", "w") as f:
        f.write("gen_index,p_ref,q_ref\n")
        for k in range(ng):
            f.write(f"{k},{float(pg[k])!r},{float(qg[k])!r}\n")
    with open(stem + "_voltages.csv", "w") as f:
        f.write("bus_index,vm,va\n")
        for k in range(nb):
            f.write(f"{k},{float(vm[k])!r},{float(va[k])!r}\n")


if __name__ == "__main__":
    for p in sys.argv[1:]:
        solve(p)
