# Recipe: registration success rate on Redwood fragment pairs.
#
# Needs the data, which this repo does not ship. For one scene, download the
# fragment PLYs (cloud_bin_*.ply) and the ground-truth gt.log, then run
#
#   python demos/05_redwood_recipe.py path/to/scene_dir [num_splits]
#
# gt.log lists, per evaluated pair, a header "i j n" followed by four rows of
# the 4x4 pose. The pose maps fragment j into the frame of fragment i, so j is
# the source and i the target here. Success means <= 10 deg and <= 1 m.
import sys
from pathlib import Path

import numpy as np

from splitgnc.cli import register
from splitgnc.config import load_run_config
from splitgnc.errors import RegistrationError
from splitgnc.fileio import transform_from_list
from splitgnc.geometry import RigidTransform
from splitgnc.synthbench import is_success, rotation_error, translation_error


def read_gt_log(path):
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    for k in range(0, len(lines), 5):
        i, j = int(lines[k][0]), int(lines[k][1])
        pose = np.array([[float(x) for x in row] for row in lines[k + 1:k + 5]])
        yield i, j, RigidTransform.from_matrix(pose)


if len(sys.argv) < 2:
    sys.exit(__doc__ or "usage: 05_redwood_recipe.py SCENE_DIR [NUM_SPLITS]")
scene = Path(sys.argv[1])
splits = int(sys.argv[2]) if len(sys.argv) > 2 else 4
cfg = load_run_config(preset="redwood", num_splits=splits)

ok = total = 0
for i, j, gt in read_gt_log(scene / "gt.log"):
    total += 1
    try:
        rec = register(scene / f"cloud_bin_{j}.ply", scene / f"cloud_bin_{i}.ply", cfg)
    except RegistrationError as exc:
        print(f"{j}->{i}: failed ({exc.category})")
        continue
    est = transform_from_list(rec["transform"])
    re_, te = rotation_error(est, gt), translation_error(est, gt)
    ok += is_success(re_, te)
    print(f"{j}->{i}: {rec['num_correspondences']} matches, {re_:.2f} deg, {te:.3f} m")
print(f"success {ok}/{total}" + (f" = {ok / total:.1%}" if total else ""))
