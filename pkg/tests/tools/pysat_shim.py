"""Minimal SAT-competition front end over python-sat: ``pysat_shim.py file.cnf``."""

import sys

from pysat.formula import CNF
from pysat.solvers import Solver


def main(path):
    cnf = CNF(from_file=path)
    with Solver(name="g4", bootstrap_with=cnf.clauses) as s:
        if s.solve():
            print("s SATISFIABLE")
            print("v " + " ".join(map(str, s.get_model())) + " 0")
            return 10
        print("s UNSATISFIABLE")
        return 20


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
