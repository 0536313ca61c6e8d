"""
Fused costs and greedy assignment
=================================

Matching detections to tracks combines two signals: appearance
similarity from a pluggable provider, and geometric consistency (image
overlap for the camera, centroid distance for LiDAR). A pair is
admissible when either signal vouches for it; everything else is walled
off behind a sentinel cost.
"""

import numpy as np

from crosstrack import BBox3D, LIDAR, Detection, default_config, greedy_match
from crosstrack.affinity import ScoreMatrix, geometric_cost_matrix, total_cost

cfg = default_config()


def det(name, x, z):
    return Detection(stream=LIDAR, frame=0, score=0.9, det_id=name,
                     box3d=BBox3D(x, 1.0, z, 3.9, 1.6, 1.5, 0.0))


# three tracked objects (rows) and three fresh detections (columns)
tracks = [det("track/0", 0.0, 20.0), det("track/1", 6.0, 30.0), det("track/2", -5.0, 45.0)]
dets = [det("det/0", 0.4, 20.3),     # clearly track 0
        det("det/1", 6.1, 30.1),     # clearly track 1
        det("det/2", 10.0, 55.0)]    # near nothing

geo = geometric_cost_matrix([t.box3d for t in tracks], dets, LIDAR,
                            row_ids=[t.det_id for t in tracks])
print("centroid distances (m):")
print(np.array_str(geo.values, precision=3, suppress_small=True))

# an appearance provider that recognizes the first pairing only
sim = ScoreMatrix(row_ids=geo.row_ids, col_ids=geo.col_ids,
                  values=np.array([[0.95, 0.10, 0.05],
                                   [0.05, 0.40, 0.05],   # geometry must carry this one
                                   [0.05, 0.05, 0.10]]))

cost = total_cost(sim, geo, cfg, LIDAR)
print(f"\nfused cost (distance normalized by the {cfg.theta_g_3d:g} m gate, "
      f"sentinel = {cfg.sentinel:g}):")
print(np.array_str(cost.values, precision=3, suppress_small=True))

# Pair (1,1) is admissible purely through geometry (0.14 m apart) even
# though its appearance score sits below the 0.5 acceptance bar. Pair
# (2,2) fails both signals and gets the sentinel.

result = greedy_match(cost.values)
print("\ngreedy picks, cheapest surviving entry first:")
for r, c, v in result.matches:
    print(f"  {cost.row_ids[r]} <- {cost.col_ids[c]}   cost {v:.3f}")
print(f"unmatched tracks:     {[cost.row_ids[i] for i in result.unmatched_rows]}")
print(f"unmatched detections: {[cost.col_ids[j] for j in result.unmatched_cols]}")

# Greedy is deliberately not optimal: it commits the global minimum, then
# repeats on what is left. On adversarial matrices that costs more than
# an optimal solver would pay, but it never flips a confident pair to
# rescue a marginal one, which is the behavior a tracker wants.
adversarial = np.array([[0.10, 0.20],
                        [0.20, 1.00]])
print("\nadversarial matrix:", greedy_match(adversarial).matches,
      "(total 1.10; the optimal pairing would pay 0.40)")
