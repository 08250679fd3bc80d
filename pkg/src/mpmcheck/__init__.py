"""Three-valued CSL model checking for Markov population models.

Infinite-state continuous-time chains given by transition classes are
checked against CSL formulas on finite truncations: transient operators
drive mass-directed state exploration, the steady-state operator rests on
drift-certified windows with per-state stationary envelopes, and every
probability is reported as a safe interval.
"""

from .checker import ProbInterval, Verdict, compare, eval_formula, steady_op, verdict_at
from .csl import parse_formula, render
from .explore import ExploreConfig, fsp_explore, transient_trunc, truncate_for
from .mpm import ModelSpec, TransitionClass, load_model, parse_model, successors
from .steady import LyapunovCertificate, build_certificate, check_ergodicity_witness
from .ternary import Ternary, t_and, t_not, t_or
from .trunc import AbsorbingView, Truncation, make_absorbing

__all__ = [
    "AbsorbingView", "ExploreConfig", "LyapunovCertificate", "ModelSpec",
    "ProbInterval", "Ternary", "TransitionClass", "Truncation", "Verdict",
    "build_certificate", "check_ergodicity_witness", "compare", "eval_formula",
    "fsp_explore", "load_model", "make_absorbing", "parse_formula",
    "parse_model", "render", "steady_op", "successors", "t_and", "t_not",
    "t_or", "transient_trunc", "truncate_for", "verdict_at",
]

__version__ = "0.1.0"
