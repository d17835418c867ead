"""Builders for curves and automorphisms, one module per construction."""
from .common import HoloCurve, PipelineError, SceneError
from .lemma3 import certify_move, lemma3_move
from .prop1 import prop1_convex, prop1_line, verify_frame
from .prop5 import claim_check, interpolation_stage, prop2_initial, prop5_run, stage_checks
from .prop6 import prop6_immersion, prop6_sections, t_scan
from .prop7 import dichotomy_check, prop7_jet, prop7_sections

__all__ = [
    "HoloCurve", "PipelineError", "SceneError", "certify_move", "lemma3_move",
    "prop1_convex", "prop1_line", "verify_frame", "claim_check", "interpolation_stage",
    "prop2_initial", "prop5_run", "stage_checks", "prop6_immersion", "prop6_sections",
    "t_scan", "dichotomy_check", "prop7_jet", "prop7_sections",
]
