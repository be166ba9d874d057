#!/usr/bin/env python3
"""Regenerate tests/golden/ from the reference netlists.

Run after an intentional change to freeze() or the RTL/testbench
emitters, then review the diff before committing.
"""

import sys
from pathlib import Path

repo = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(repo / "tests"))

from golden_nets import REFERENCE_NETLISTS, TB_SEED, TB_VECTORS  # noqa: E402

from fixynn.rtl import emit_testbench, emit_verilog, write_files  # noqa: E402


def main():
    root = repo / "tests" / "golden"
    for name, build in REFERENCE_NETLISTS.items():
        nl = build()
        files = emit_verilog(nl)
        files.update(emit_testbench(nl, TB_VECTORS, TB_SEED))
        write_files(root / name, files)
        print(f"{name}: {len(files)} files "
              f"({sum(len(v) for v in files.values())} bytes)")


if __name__ == "__main__":
    main()
