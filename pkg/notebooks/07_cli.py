# # Command line
#
# Everything above is reachable from `microverif` (or `python -m microverif`).
# Output is `key: value` lines; the exit status is 0 only when every
# requested obligation was proved.

import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
STATE = str(ROOT / "data" / "shrd_demo.state")


def cli(*args):
    p = subprocess.run([sys.executable, "-m", "microverif", *args], capture_output=True, text=True)
    print("$ microverif", " ".join(args))
    print(p.stdout + p.stderr, end="")
    print("exit", p.returncode, "\n")
    return p.returncode


cli("run", "--bytes", "48 0F AC D1 10", "--state", STATE)
cli("trace-ucode", "--bytes", "48 0F AC D1 10", "--state", STATE)
cli("prove", "decode", "lock-ud")
cli("prove", "exec", "SUB")

with tempfile.TemporaryDirectory() as d:
    cli("mutate", "--bug", "exec-dontcare-src2", "--prove", "exec", "AND@64->64", "--cex-dir", d)
    cli("export-cnf", "exec", "JE", "--out", d)
    cli("prove", "decode", "all", "--save", f"{d}/r.json")
    cli("report", "--results", f"{d}/r.json", "--no-timings")
