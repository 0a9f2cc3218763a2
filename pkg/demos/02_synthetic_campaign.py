# Success rate vs outlier rate on the built-in stand-in cloud.
# Same protocol as the acceptance suite, with fewer trials by default.
import sys

from splitgnc.geometry import voxel_downsample
from splitgnc.splitting import SplitConfig
from splitgnc.synthbench import Method, ScenarioConfig, make_standin_cloud, run_campaign

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10

src = voxel_downsample(make_standin_cloud(), 0.042)
print(f"{len(src)} correspondences per trial")

methods = [Method("no-split", split=SplitConfig(num_splits=1)),
           Method("4 splits", split=SplitConfig(num_splits=4))]
rates = [0.2, 0.5, 0.8, 0.9, 0.95]
configs = [ScenarioConfig(outlier_rate=r, trials=trials) for r in rates]

res = run_campaign(src, configs, methods)

print(f"{'method':<10} {'outliers':>8} {'success':>8} {'med rot':>9} {'ms':>7}")
for a in res.aggregates:
    print(f"{a.method:<10} {a.outlier_rate:>8.2f} {a.success_rate:>8.2f} "
          f"{a.median_rot_err_deg:>9.2e} {a.mean_wall_ms:>7.1f}")

# the CSV consumed by external plotting
with open("campaign.csv", "w") as fh:
    fh.write(res.to_csv())
