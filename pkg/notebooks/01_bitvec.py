# # Bit-vectors over an and-inverter graph
#
# Every value in microverif is a `BitVec`: a tuple of AIG literals. When all
# literals are constants the vector folds to an ordinary integer, so the same
# code runs concretely and symbolically.

from microverif.aig import aig_scope
from microverif.bitvec import BitVec, bv_eq, bv_eval, bv_shift, env_for

# ## Concrete arithmetic folds to integers

x = BitVec.const(64, 0x0123_4567_89AB_CDEF)
k = BitVec.const(8, 16)
print(hex(bv_shift("ROR", x, k).value))
print(hex((x + BitVec.const(64, 1)).value))

# ## Symbolic values build circuits
#
# A symbolic input is a fresh AIG node per bit. Operations extend the graph;
# structural hashing shares identical subterms.

with aig_scope() as g:
    a, b = BitVec.var(16, "a"), BitVec.var(16, "b")
    s = a + b
    before = len(g)
    same = a + b
    print("rebuilding a+b adds", len(g) - before, "nodes; identical:", same == s)
    s2 = b + a  # AND operands are sorted before hashing, so this is the same circuit
    print("b+a adds", len(g) - before, "nodes")

    # evaluate under an environment
    env = {**env_for(a, 1000), **env_for(b, 234)}
    print("a+b =", bv_eval(s, env), " b+a =", bv_eval(s2, env))

# ## Bit-parallel simulation
#
# `Aig.simulate` pushes one big integer per input through the graph, one bit
# per test vector. Checking ten thousand additions takes a single pass.

import random

rng = random.Random(0)
n = 10_000
with aig_scope() as g:
    a, b = BitVec.var(32, "a"), BitVec.var(32, "b")
    out = bv_eq(a + b, b + a)
    pats = {lit >> 1: rng.getrandbits(n) for lit in a.bits + b.bits}
    (col,) = g.simulate(out.bits, pats, n)
    print("commutativity held on", bin(col).count("1"), "of", n, "random vectors")
