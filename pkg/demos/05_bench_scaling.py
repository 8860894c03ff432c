"""Scaling shape on a growing cylinder family (reduced sizes for a demo).

Graph size tracks face count linearly; the segmentation assignment stays
near-linear; tree extraction grows at least as fast as segmentation. The
acceptance suite runs the full family up to ~48k faces.
"""

from skelseg import bench_scaling
from skelseg.pipeline import bench_csv

rows, slopes = bench_scaling((1500, 3000, 6000, 12000), seed=0, repeats=2)

print(f"{'faces':>7} {'graph nodes':>12} {'territory cells':>16} "
      f"{'extract s':>10} {'segment s':>10} {'total s':>8}")
for r in rows:
    print(f"{r['faces']:>7} {r['graph_nodes']:>12} {r['territory_cells']:>16} "
          f"{r['tree_extraction']:>10.3f} {r['segmentation']:>10.3f} {r['total']:>8.2f}")

print("\nlog-log slopes vs face count:")
for k, v in sorted(slopes.items()):
    print(f"  {k:24s} {v:.3f}")

with open("bench_demo.csv", "w") as fh:
    fh.write(bench_csv(rows, slopes))
print("\nwrote bench_demo.csv")
