"""Regenerate the bundled two-actor skeleton config from the synth template."""
import json
from pathlib import Path

from mocap_gapeval.io import skeleton_to_dict
from mocap_gapeval.synth import template_skeleton

OUT = Path(__file__).resolve().parents[1] / "src" / "mocap_gapeval" / "data" / "default_skeleton.json"

if __name__ == "__main__":
    skel = template_skeleton(("A1", "A2"))
    OUT.write_text(json.dumps(skeleton_to_dict(skel), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({len(skel.marker_ids)} markers, {len(skel.bones)} bones)")
