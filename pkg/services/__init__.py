from .sampling import RngStream, MixtureSource, ArraySource, sample, generate_separated_means
from .gaussian_tester import select_params, decide, estimate_t
from .learner import learn
from .location_family import general_select_params, decide_general, general_learn
from .hard_instance import build_moment_matched_pair, tv_numeric, tv_upper_bound

__all__ = [
    'RngStream', 'MixtureSource', 'ArraySource', 'sample', 'generate_separated_means',
    'select_params', 'decide', 'estimate_t',
    'learn',
    'general_select_params', 'decide_general', 'general_learn',
    'build_moment_matched_pair', 'tv_numeric', 'tv_upper_bound',
]
