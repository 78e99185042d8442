"""Optimal control problem templates and their multiple-shooting transcription."""

from trigopt.ocp.integrators import integrate, rk4_step, simulate
from trigopt.ocp.shooting import TranscribedNlp, initial_guess, transcribe
from trigopt.ocp.spec import OcpSpec, StageImplication, augment_with_rate_control

__all__ = [
    "OcpSpec",
    "StageImplication",
    "TranscribedNlp",
    "augment_with_rate_control",
    "initial_guess",
    "integrate",
    "rk4_step",
    "simulate",
    "transcribe",
]
