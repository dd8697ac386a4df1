# # Tseitin encoding and the CDCL solver
#
# Goals are 1-bit vectors. `tseitin_encode` turns one into CNF, `solve` runs
# the built-in CDCL solver, and `prove_equal` wraps the whole miter flow.

import itertools
import tempfile
from pathlib import Path

from microverif.aig import aig_scope
from microverif.bitvec import BitVec, bv_eq, bv_eval
from microverif.sat import Budget, Cnf, export_dimacs, parse_dimacs, prove_equal, solve, tseitin_encode

# ## An equivalence that holds, and one that does not

with aig_scope():
    a, b = BitVec.var(32, "a"), BitVec.var(32, "b")
    print(prove_equal(a ^ b, (a | b) - (a & b)).verdict)
    bad = prove_equal(a + b, a | b)
    print(bad.verdict, "a =", hex(bv_eval(a, bad.env)), "b =", hex(bv_eval(b, bad.env)))

# ## Pigeonhole: six pigeons, five holes


def pigeonhole(holes):
    var = lambda p, h: p * holes + h + 1  # noqa: E731
    cl = [[var(p, h) for h in range(holes)] for p in range(holes + 1)]
    for h in range(holes):
        for p, q in itertools.combinations(range(holes + 1), 2):
            cl.append([-var(p, h), -var(q, h)])
    return Cnf((holes + 1) * holes, cl)


res = solve(pigeonhole(5), Budget(60))
print(res.verdict, res.stats)

# ## DIMACS out and back in
#
# Every obligation can be written as DIMACS for an outside solver; the
# `--solver` flag of the CLI runs one and re-checks its model.

with aig_scope():
    x, y = BitVec.var(8, "x"), BitVec.var(8, "y")
    cnf = tseitin_encode(~bv_eq(x ^ y, (x | y) - (x & y)))  # no input makes this 1
    with tempfile.TemporaryDirectory() as d:
        p = export_dimacs(cnf, Path(d) / "g.cnf")
        print(p.read_text().splitlines()[0])
        print("unsat after round trip:", solve(parse_dimacs(p.read_text())).is_unsat)
