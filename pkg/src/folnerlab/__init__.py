"""Computational Følner sequences, convergence modes and ergodic-average fluctuation bounds."""
from .errors import (BudgetExceeded, CertificateError, DescriptorMismatch, FolnerLabError,
                     SearchExhausted)
from .groups import (BaumslagSolitar12, Cyclic, Dyadic, FreeGroup, IntegerLattice, Product,
                     ball, group_from_json, growth_sequence)
from .subsets import DyadicRows, FiniteSubset, LatticeBox
from .folner import (DistanceFunction, FolnerSchedule, box_schedule, bs12_schedule,
                     closed_form_modulus, empirical_modulus, fast_refine, folner_defect,
                     greedy_computable_folner, interval_schedule, is_fast, k_boundary,
                     product_schedule, symdiff_ratio, verify_modulus)
from .modes import (NormedSeq, brute_fluctuations, count_fluctuations,
                    count_fluctuations_at_distance, count_upcrossings, family_S, family_S_prime,
                    family_step, family_superaffine, learn_limit, metastable_index)
from .convexity import uc_modulus
from .dynamics import (Observable, averaging_lemma_check, bishop_upcrossings_check,
                       ergodic_average, make_bs12_affine_system, make_torus_system,
                       mean_projection, rate_from_limit_norm, slow_rate_demo,
                       verify_fast_corollary, verify_main_bound)

__version__ = "0.1.0"
