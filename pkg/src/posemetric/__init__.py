"""posemetric: edit character animation through objective pose metrics.

Per-pose scalar metrics (angles between joint-derived vectors) drive small
edit networks operating in a learned latent pose space; single poses or
whole clips are edited by blending latents under a per-frame weight curve.
"""

__version__ = "0.1.0"
