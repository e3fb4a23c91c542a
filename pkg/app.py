import argparse
import logging
import os
import sys

from marshmallow import ValidationError

import store
from commands import COMMANDS
from config import config, load_constants
from models.schemas import ExperimentConfigSchema
from utils.errors import EXIT_USAGE, SpecmixError


class SpecmixApp:
    """Command-line application: parser, selected configuration and error handlers."""

    def __init__(self, config_class):
        self.config = config_class
        self.parser = None
        self.logger = logging.getLogger('specmix')
        self.error_handlers = {}

    def errorhandler(self, exc_type):
        def register(handler):
            self.error_handlers[exc_type] = handler
            return handler
        return register

    def handle_error(self, error):
        """Most specific registered handler for the exception: (body, exit code)."""
        for exc_type in type(error).__mro__:
            if exc_type in self.error_handlers:
                return self.error_handlers[exc_type](error)
        raise error

    def resolve(self, args):
        """
        Merge the --config file with command-line values and validate the result.

        Returns:
            (command, cfg): subcommand name and effective experiment config
        """
        values = {key: value for key, value in vars(args).items()}
        command = values.pop('command')
        file_cfg = store.read_json(values.pop('config')) if 'config' in values else {}
        constants = dict(file_cfg.get('constants') or {})
        for item in values.pop('constant', []):
            name, _, value = item.partition('=')
            constants[name.strip()] = float(value)
        merged = {**file_cfg, **values}
        if constants:
            merged['constants'] = constants

        cfg = ExperimentConfigSchema().load(merged)
        if cfg.get('seed') is None:
            cfg['seed'] = self.config.SEED
        if cfg.get('profile') is None:
            cfg['profile'] = 'paper' if command == 'verify' else self.config.PROFILE
        cfg.setdefault('budget_cap', self.config.BUDGET_CAP)
        cfg.setdefault('candidate_cap', self.config.CANDIDATE_CAP)
        load_constants(cfg['profile'], cfg['constants'])
        return command, cfg

    def run(self, argv=None) -> int:
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_USAGE if exc.code else 0
        configure_logging(self)

        cfg = None
        try:
            command, cfg = self.resolve(args)
            self.logger.info(f"Running '{command}' with seed {cfg['seed']} ({cfg['profile']} profile)")
            result = COMMANDS[command](cfg)
            if cfg['format'] == 'csv' and result.csv_text is not None:
                store.write_text(cfg.get('out'), result.csv_text)
            else:
                store.write_json(cfg.get('out'), result.payload)
            return result.exit_code
        except Exception as error:
            body, exit_code = self.handle_error(error)
            if cfg is not None:
                body = {**body, 'config': cfg}
            store.write_json(None, body)
            return exit_code


def _option(parser, *flags, **kwargs):
    # unset options stay out of the namespace so --config values are not overwritten
    parser.add_argument(*flags, default=argparse.SUPPRESS, **kwargs)


def _source_options(parser):
    _option(parser, '--model', help='Model file (generate output, model JSON or hard-instance pair)')
    _option(parser, '--samples', help='Sample file (CSV or JSON)')
    _option(parser, '--weights', type=float, nargs='+', help='Mixed linear regression weights')
    _option(parser, '--pair-side', dest='pair_side', choices=['p', 'q'], help='Side of a hard-instance pair')
    _option(parser, '--mlr', action='store_true', help='Treat --samples as (x, y) regression pairs')
    _option(parser, '--family', help='Base family of the mixture')
    _option(parser, '--k', type=int, help='Number of components')
    _option(parser, '--delta', type=float, help='Separation of the means')
    _option(parser, '--eps', type=float, help='Closeness target')
    _option(parser, '--tester-samples', dest='tester_samples', type=int, help='Override the tester sample count')
    _option(parser, '--general', action='store_true', help='Use the CF-division tester for gaussian data')


def _learner_options(parser):
    _option(parser, '--eps-ratio', dest='eps_ratio', type=float, help='eps as a fraction of delta')
    _option(parser, '--method', choices=['fourier', 'em'], help='Learner (fourier) or EM baseline')
    _option(parser, '--n', type=int, help='Sample count for the EM baseline')
    _option(parser, '--vote-multiplier', dest='vote_multiplier', type=float)
    _option(parser, '--candidate-multiplier', dest='candidate_multiplier', type=float)
    _option(parser, '--candidate-cap', dest='candidate_cap', type=int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _option(common, '--seed', type=int, help='Master seed')
    _option(common, '--config', help='JSON experiment config; command-line values take precedence')
    _option(common, '--out', help='Output path (default stdout)')
    _option(common, '--format', choices=['json', 'csv'], help='Output format')
    _option(common, '--profile', choices=['paper', 'practical'], help='Constants profile')
    _option(common, '--budget-cap', dest='budget_cap', type=int, help='Largest tester sample count')
    _option(common, '--threads', type=int, help='Worker count (default SPECMIX_THREADS)')
    _option(common, '--constant', action='append', metavar='NAME=VALUE', help='Override one constant')

    parser = argparse.ArgumentParser(prog='specmix', parents=[common],
                                     description='Learn the means of separated mixtures with Fourier testers.')
    sub = parser.add_subparsers(dest='command', required=True)

    generate = sub.add_parser('generate', parents=[common], help='Seeded separated truth model')
    _option(generate, '--family')
    _option(generate, '--k', type=int)
    _option(generate, '--d', type=int)
    _option(generate, '--delta', type=float)
    _option(generate, '--radius', type=float)

    sample = sub.add_parser('sample', parents=[common], help='Samples of a model, or regression pairs')
    _option(sample, '--model')
    _option(sample, '--pair-side', dest='pair_side', choices=['p', 'q'])
    _option(sample, '--weights', type=float, nargs='+')
    _option(sample, '--n', type=int)

    test = sub.add_parser('test', parents=[common], help='One tester call at --mu-star')
    _source_options(test)
    _option(test, '--mu-star', dest='mu_star', type=float, nargs='+', help='Point to test')

    learn = sub.add_parser('learn', parents=[common], help='Learn the component means')
    _source_options(learn)
    _learner_options(learn)
    _option(learn, '--truth', help='Model file holding the true means')
    _option(learn, '--model-out', dest='model_out', help='Write the learned means as a model file')

    sweep = sub.add_parser('sweep', parents=[common], help='Success-rate map over a (delta, d) grid')
    _learner_options(sweep)
    _option(sweep, '--family')
    _option(sweep, '--k', type=int)
    _option(sweep, '--deltas', type=float, nargs='+')
    _option(sweep, '--dims', type=int, nargs='+')
    _option(sweep, '--eps', type=float)
    _option(sweep, '--trials', type=int)
    _option(sweep, '--radius', type=float)
    _option(sweep, '--tester-samples', dest='tester_samples', type=int)
    _option(sweep, '--general', action='store_true')

    hard = sub.add_parser('hard-instance', parents=[common], help='Moment-matched pair and TV certificates')
    _option(hard, '--N', dest='N', type=int, help='Points per set')
    _option(hard, '--t', type=int, help='Matched moments')
    _option(hard, '--delta', type=float)
    _option(hard, '--R', dest='R', type=float, help='Base radius')
    _option(hard, '--starts', type=int)
    _option(hard, '--eps-tail', dest='eps_tail', type=float)
    _option(hard, '--C', dest='C', type=float, help='Lower-bound constant (reported with --k)')
    _option(hard, '--k', type=int)
    _option(hard, '--d', type=int)

    sub.add_parser('families', parents=[common], help='List supported families')

    verify = sub.add_parser('verify', parents=[common], help='Run the verification suites')
    _option(verify, '--suite', dest='suites', action='append',
            choices=['claims', 'norm_lb', 'chi2', 'cf', 'oracle', 'ball'])
    _option(verify, '--fixtures', type=int)
    _option(verify, '--oracle-runs', dest='oracle_runs', type=int)
    _option(verify, '--oracle-samples', dest='oracle_samples', type=int)
    _option(verify, '--cf-samples', dest='cf_samples', type=int)
    return parser


def create_app(config_name=None):
    """Application factory: configuration, parser and error handlers."""
    if config_name is None:
        config_name = os.getenv('SPECMIX_ENV', 'default')

    app = SpecmixApp(config.get(config_name, config['default']))
    app.parser = build_parser()
    register_error_handlers(app)
    return app


def configure_logging(app):
    """Configure application logging; records go to stderr so stdout stays machine-readable."""
    log_level = getattr(logging, getattr(app.config, 'LOG_LEVEL', 'INFO'))
    handlers = [logging.StreamHandler(sys.stderr)]
    if app.config.LOG_FILE:
        handlers.append(logging.FileHandler(app.config.LOG_FILE))

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )
    app.logger.setLevel(log_level)


def register_error_handlers(app):
    """Register exit codes and JSON error bodies per exception type."""

    @app.errorhandler(SpecmixError)
    def specmix_error(error):
        return error.to_dict(), error.exit_code

    @app.errorhandler(ValidationError)
    def invalid_config(error):
        return {'error': 'Invalid configuration', 'message': error.messages}, EXIT_USAGE

    @app.errorhandler(OSError)
    def unreadable_file(error):
        return {'error': 'File error', 'message': str(error)}, EXIT_USAGE

    @app.errorhandler(ValueError)
    def bad_request(error):
        return {'error': 'Bad request', 'message': str(error)}, EXIT_USAGE

    @app.errorhandler(Exception)
    def internal_error(error):
        app.logger.error(f"Internal error: {str(error)}", exc_info=True)
        return {'error': 'Internal error', 'message': 'An unexpected error occurred'}, EXIT_USAGE


def main(argv=None) -> int:
    return create_app().run(argv)


if __name__ == '__main__':
    sys.exit(main())
