from marshmallow import (
    RAISE, Schema, ValidationError, fields, post_load, validate, validates_schema,
)

from models.mixture import FamilyId, MixtureModel
from models.tester import Profile

FAMILIES = [f.value for f in FamilyId]
PROFILES = [p.value for p in Profile]


class MixtureModelSchema(Schema):
    """Serialized mixture model: {"family", "d", "k", "means"}."""

    class Meta:
        unknown = RAISE

    family = fields.String(required=True, validate=validate.OneOf(FAMILIES))
    d = fields.Integer(required=True, validate=validate.Range(min=1))
    k = fields.Integer(required=True, validate=validate.Range(min=1))
    means = fields.List(fields.List(fields.Float(allow_nan=False)), required=True)

    @validates_schema
    def validate_shape(self, data, **kwargs):
        means = data.get('means', [])
        if len(means) != data.get('k'):
            raise ValidationError(f"expected {data.get('k')} means, got {len(means)}", 'means')
        if any(len(m) != data.get('d') for m in means):
            raise ValidationError(f"every mean must have dimension {data.get('d')}", 'means')

    @post_load
    def make_model(self, data, **kwargs):
        return MixtureModel.from_dict(data)


class HardInstanceFileSchema(Schema):
    """Pair file written by the hard-instance command; only the point sets are read."""

    class Meta:
        unknown = RAISE

    mu_p = fields.List(fields.Float(), required=True)
    mu_q = fields.List(fields.Float(), required=True)
    N = fields.Integer()
    t = fields.Integer()
    delta = fields.Float()
    R = fields.Float()
    moment_residuals = fields.List(fields.Float())
    param_distance = fields.Float()
    objective = fields.Float()
    start_index = fields.Integer()
    density_condition_met = fields.Boolean()
    tv_numeric = fields.Float(allow_none=True)
    tv_upper_bound = fields.Dict(allow_none=True)
    tv_upper_bound_unavailable = fields.String(allow_none=True)
    lower_bound_params = fields.Dict(allow_none=True)
    config = fields.Dict()


class ExperimentConfigSchema(Schema):
    """Every key a command accepts; anything else is rejected."""

    class Meta:
        unknown = RAISE

    # problem
    family = fields.String(validate=validate.OneOf(FAMILIES), load_default='gaussian')
    k = fields.Integer(validate=validate.Range(min=1))
    d = fields.Integer(validate=validate.Range(min=1))
    delta = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    eps = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    eps_ratio = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    radius = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    mu_star = fields.List(fields.Float())
    weights = fields.List(fields.Float())

    # inputs
    model = fields.String()
    samples = fields.String()
    truth = fields.String()
    pair_side = fields.String(validate=validate.OneOf(['p', 'q']), load_default='p')

    # tuning
    profile = fields.String(validate=validate.OneOf(PROFILES), allow_none=True, load_default=None)
    constants = fields.Dict(keys=fields.String(), values=fields.Float(), load_default=dict)
    seed = fields.Integer(load_default=None, allow_none=True)
    n = fields.Integer(validate=validate.Range(min=1))
    tester_samples = fields.Integer(validate=validate.Range(min=1))
    vote_multiplier = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    candidate_multiplier = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    budget_cap = fields.Integer(validate=validate.Range(min=1))
    candidate_cap = fields.Integer(validate=validate.Range(min=1))
    threads = fields.Integer(validate=validate.Range(min=1))
    method = fields.String(validate=validate.OneOf(['fourier', 'em']), load_default='fourier')
    general = fields.Boolean(load_default=False)
    mlr = fields.Boolean(load_default=False)

    # sweep
    trials = fields.Integer(validate=validate.Range(min=1), load_default=1)
    deltas = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)))
    dims = fields.List(fields.Integer(validate=validate.Range(min=1)))

    # hard instance
    N = fields.Integer(validate=validate.Range(min=2))
    t = fields.Integer(validate=validate.Range(min=1))
    R = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    C = fields.Float()
    starts = fields.Integer(validate=validate.Range(min=1))
    eps_tail = fields.Float(validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False))

    # verify
    suites = fields.List(fields.String(validate=validate.OneOf(
        ['claims', 'norm_lb', 'chi2', 'cf', 'oracle', 'ball'])))
    fixtures = fields.Integer(validate=validate.Range(min=1))
    oracle_runs = fields.Integer(validate=validate.Range(min=1))
    oracle_samples = fields.Integer(validate=validate.Range(min=1))
    cf_samples = fields.Integer(validate=validate.Range(min=1))

    # output
    out = fields.String()
    model_out = fields.String()
    format = fields.String(validate=validate.OneOf(['json', 'csv']), load_default='json')
