#!/usr/bin/env python3
"""Solve an exported MPS model with HiGHS (via scipy) and write a solution
file of "variable-name value" lines that `countsyn` can import.

Usage: solve_mps.py model.mps solution.txt [--integer]
"""

import argparse
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp


def parse_mps(path):
    rows = []  # (name, sense) excluding the objective
    row_index = {}
    obj_name = None
    cols = {}  # name -> list of (row_id, value); row_id -1 is objective
    col_order = []
    integrality = {}
    rhs = {}
    bounds = {}

    section = None
    in_integer = False
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            fields = line.split()
            if section == "ROWS":
                sense, name = fields[0], fields[1]
                if sense == "N":
                    if obj_name is None:
                        obj_name = name
                    continue
                row_index[name] = len(rows)
                rows.append((name, sense))
            elif section == "COLUMNS":
                if len(fields) >= 3 and fields[1] == "'MARKER'":
                    in_integer = fields[2] == "'INTORG'"
                    continue
                name = fields[0]
                if name not in cols:
                    cols[name] = []
                    col_order.append(name)
                    integrality[name] = in_integer
                for k in range(1, len(fields) - 1, 2):
                    row, val = fields[k], float(fields[k + 1])
                    rid = -1 if row == obj_name else row_index[row]
                    cols[name].append((rid, val))
            elif section == "RHS":
                for k in range(1, len(fields) - 1, 2):
                    rhs[fields[k]] = float(fields[k + 1])
            elif section == "BOUNDS":
                kind, name, value = fields[0], fields[2], float(fields[3])
                lo, hi = bounds.get(name, (0.0, np.inf))
                if kind == "UP":
                    hi = value
                elif kind == "LO":
                    lo = value
                elif kind == "FX":
                    lo = hi = value
                else:
                    raise ValueError(f"unsupported bound kind {kind}")
                bounds[name] = (lo, hi)
    return rows, row_index, cols, col_order, integrality, rhs, bounds


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("mps")
    ap.add_argument("solution")
    ap.add_argument("--integer", action="store_true", help="solve as a MILP")
    args = ap.parse_args()

    rows, row_index, cols, col_order, integrality, rhs, bounds = parse_mps(args.mps)
    n, m = len(col_order), len(rows)
    col_id = {name: j for j, name in enumerate(col_order)}

    data, ri, ci = [], [], []
    c = np.zeros(n)
    for name, entries in cols.items():
        j = col_id[name]
        for rid, val in entries:
            if rid < 0:
                c[j] += val
            else:
                data.append(val)
                ri.append(rid)
                ci.append(j)
    A = sparse.csr_matrix((data, (ri, ci)), shape=(m, n))

    row_lb = np.full(m, -np.inf)
    row_ub = np.zeros(m)
    for i, (name, sense) in enumerate(rows):
        b = rhs.get(name, 0.0)
        row_ub[i] = b
        if sense == "E":
            row_lb[i] = b
        elif sense == "G":
            row_lb[i], row_ub[i] = b, np.inf

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for name, (lo, hi) in bounds.items():
        j = col_id[name]
        lb[j], ub[j] = lo, hi

    if args.integer:
        integ = np.array([1 if integrality[name] else 0 for name in col_order])
        res = milp(c=c, constraints=LinearConstraint(A, row_lb, row_ub),
                   bounds=Bounds(lb, ub), integrality=integ)
        ok, x = res.success, res.x
    else:
        eq = [i for i, (_, s) in enumerate(rows) if s == "E"]
        le = [i for i, (_, s) in enumerate(rows) if s != "E"]
        res = linprog(
            c,
            A_ub=A[le] if le else None,
            b_ub=row_ub[le] if le else None,
            A_eq=A[eq] if eq else None,
            b_eq=row_ub[eq] if eq else None,
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        ok, x = res.status == 0, res.x

    if not ok or x is None:
        print(f"solver reported infeasibility or failure: {getattr(res, 'message', '')}",
              file=sys.stderr)
        return 1

    with open(args.solution, "w") as fh:
        fh.write(f"# solved {args.mps}: {len(col_order)} columns, {m} rows\n")
        for name in col_order:
            v = x[col_id[name]]
            if abs(v) > 1e-11:
                fh.write(f"{name} {v:.12g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
