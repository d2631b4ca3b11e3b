"""End-to-end demo: optimize a short walk on the bundled biped rig.

Uses the mock critic (target = rendered initialization pulled toward the
prompt's gait prior), a reduced iteration count, and writes motion JSON,
OBJ frames, and PNG renders under out/demo/.
"""

from __future__ import annotations

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from skelmotion import cli  # noqa: E402

HERE = os.path.dirname(__file__)


def main() -> int:
    rig = os.path.join(HERE, "..", "rigs", "biped")
    out = os.path.join(HERE, "..", "out", "demo")
    return cli.main([
        "animate", "--rig", rig, "--prompt", "a biped walking",
        "--out", out, "--seed", "7", "--iterations", "120",
        "--export-png",
    ])


if __name__ == "__main__":
    sys.exit(main())
