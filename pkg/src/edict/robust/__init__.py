from edict.robust.edgr import InferenceResult, ReweightPolicy, clip_to_band, edgr_infer, edgr_infer_batch
from edict.robust.sweep import SweepConfig, SweepResult, build_policies, noise_sweep, write_sweep

__all__ = [
    "InferenceResult",
    "ReweightPolicy",
    "SweepConfig",
    "SweepResult",
    "build_policies",
    "clip_to_band",
    "edgr_infer",
    "edgr_infer_batch",
    "noise_sweep",
    "write_sweep",
]
