"""
Sharp constants and compactness thresholds
==========================================

The HLS and Sobolev constants fix the energy level below which
Palais-Smale sequences stay compact. This prints them for a few
``(N, alpha)`` pairs together with which coupling window a given ``p`` falls in.
"""

# %%
from choquard_lab import ProblemParams, constants_report, case_window

for n, alpha, p, fam in [(3, 1.0, 4.5, "A"), (3, 1.0, 3.0, "A"), (3, 2.0, 3.0, "B"),
                         (4, 2.0, 2.5, "A"), (5, 1.0, 2.8, "C")]:
    params = ProblemParams(n, alpha, p, 1.0, fam)
    rep = constants_report(params)
    print(f"N={n} alpha={alpha} p={p} family={fam}: C_HLS={rep.hls_constant:.8f} "
          f"S={rep.sobolev:.8f} S_HL={rep.shl:.8f} threshold={rep.threshold:.8f} "
          f"window={case_window(params)}")

# %%
# Window 1 means the level estimate holds for every positive coupling;
# window 2 means it needs the coupling large.
