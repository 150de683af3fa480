"""The full closed loop: every packet is decoded against the channel
predicted from the current room image, the image is refreshed from a
sliding window of decoded packets, and earlier packets are re-decoded
(feedback) while the image is still improving.

Communication and sensing help each other: a better image predicts the
channel better (fewer symbol errors), and correctly decoded symbols give
cleaner channel estimates (a sharper image).
"""

import numpy as np

from jcas.harness import ExperimentConfig, build_system
from jcas.joint import JointConfig, JointRunner

cfg = ExperimentConfig(
    sweep="packets", values=(20,), trials=1, seed=7,
    n_users=6, n_ores=4, n_antennas=4, sparsity=0.015,
    joint=JointConfig(
        n_packets=20, n_slots=64, n_pilot=0, n_f=10, n_b=1, k_s=5,
        ebn0_db=10.0,
    ),
)
truth, links, cb, prior, jc = build_system(cfg, 20, trial=0)
run = JointRunner(truth, links, cb, prior, jc).run()

print("packet   MSE        SER     post-fb SER  gate  self-iters")
for p in run.packets:
    post = f"{p.ser_post_feedback:.4f}" if p.ser_post_feedback is not None else "  -   "
    print(
        f"  {p.packet:3d}  {p.mse:.3e}  {p.ser:.4f}   {post}      "
        f"{'open' if p.gate else '  . '}     {p.ks_used}"
    )

first, last = run.packets[0], run.packets[-1]
print(f"\nMSE improved {first.mse / last.mse:.0f}x over {len(run.packets)} packets")
print("note how self-iterations collapse to 1 once the image stops moving,")
print("and feedback rows stop appearing at the same point (nothing to revise)")
