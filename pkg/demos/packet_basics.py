"""Wave packet basis and classical flow in a few lines.

Builds the first few packets for a squeezed complex width, checks their
overlaps, then carries the packet parameters through the avoided crossing and
reports the conserved quantities.

    python demos/packet_basics.py
"""

import numpy as np

from hagprop.classical_flow import propagate
from hagprop.electronic import avoided_crossing
from hagprop.multiindex import MultiIndexTable
from hagprop.wavepacket import WavepacketParams, cond1_defects, gram_matrix


def main():
    A = 0.8 + 0.6j
    B = 1.0 / np.conj(A)
    p = WavepacketParams(A, B, 0.3, -0.5, hbar=0.05)
    print("compatibility defects:", cond1_defects(p.A, p.B))
    G = gram_matrix(p, MultiIndexTable(1, 6))
    print(f"Gram deviation for j <= 6: {np.linalg.norm(G - np.eye(7)):.2e}")

    model = avoided_crossing(0.6, 1.0)
    traj = propagate(WavepacketParams(1.0, 1.0, -1.2, 2.2), 1.2, 1e-3, model)
    print(f"a(T) = {traj.a[-1, 0]:.6f}, eta(T) = {traj.eta[-1, 0]:.6f}")
    print(f"energy drift {traj.energy_drift():.2e}, largest defect {traj.max_defect():.2e}")


if __name__ == "__main__":
    main()
