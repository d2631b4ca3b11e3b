"""Write the built-in fixture rigs as loadable rig bundles under rigs/.

Each bundle gets skeleton.json, mesh.obj, weights.json, and a manifest
with the expected element counts so loaders can be checked against it.
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from skelmotion import fixtures, io  # noqa: E402

RIGS = {
    "toy": fixtures.toy_rig,
    "biped": fixtures.biped_rig,
    "quadruped": fixtures.quadruped_rig,
    "tail": fixtures.tail_rig,
}


def main() -> None:
    base = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "rigs")
    for name, make in RIGS.items():
        rig = make()
        rig_dir = os.path.join(base, name)
        io.save_rig(rig_dir, rig.skeleton, rig.vertices, rig.faces,
                    rig.weight_matrix)
        manifest = {
            "format_version": io.FORMAT_VERSION,
            "name": name,
            "joints": len(rig.skeleton),
            "vertices": int(len(rig.vertices)),
            "faces": int(len(rig.faces)),
        }
        io.atomic_write_text(os.path.join(rig_dir, "manifest.json"),
                             json.dumps(manifest, indent=2) + "\n")
        print(f"wrote {rig_dir} ({manifest['joints']} joints, "
              f"{manifest['vertices']} vertices)")


if __name__ == "__main__":
    main()
