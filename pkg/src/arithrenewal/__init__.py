"""Arithmetic implicit renewal theory: tilted lattice laws, renewal sequences and
log-periodic tails of perpetuities and maximum equations, with exact oracles."""

from .errors import *  # noqa: F401,F403
from .implicit import (
    EmpiricalTail,
    ExactTail,
    PeriodicQ,
    PsiFunction,
    check_conditions,
    jittered_grid,
    lemma1_extend,
    psi,
    q_from_psi,
    q_from_smoothing,
    q_from_tail,
    smooth_hat,
)
from .lattice import ArithmeticLaw, PowerExpTail, convolve, detect_span, geometric_law, power_law, subexp_diagnostic
from .oracles import (
    QTarget,
    qset_construct,
    qset_construct_left,
    qset_exact_tail,
    sn_pmf,
    st_petersburg_pair,
    st_petersburg_tail,
)
from .pairs import JointABLaw
from .renewal import blackwell_check, defective_check, key_renewal_eval, renewal_sequence, srt_check
from .simulate import SimConfig, sample_ab0_exact, sample_ifs, sample_max, sample_perpetuity
from .tilt import cramer_info, invert_tilt, solve_kappa, truncated_mean_m

__version__ = "0.1.0"
