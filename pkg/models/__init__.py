from .mixture import FamilyId, MixtureModel, MatchingResult
from .tester import Decision, GeneralTesterParams, Profile, SBounds, TEstimate, TesterParams, Verdict
from .learner import LearnerConfig, LearnResult
from .hard_instance import HardInstancePair, LowerBoundParams, TVBound

__all__ = [
    'FamilyId', 'MixtureModel', 'MatchingResult',
    'Decision', 'GeneralTesterParams', 'Profile', 'SBounds', 'TEstimate', 'TesterParams', 'Verdict',
    'LearnerConfig', 'LearnResult',
    'HardInstancePair', 'LowerBoundParams', 'TVBound',
]
