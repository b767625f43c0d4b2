"""
besovflow - command-line entry point
Besov regularity measurements, K-functionals and Euler pressure experiments
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from services.euler import load_run, pressure_time_regularity, run_euler, run_invariants
from services.experiments import run as run_experiments
from services.field_io import read_field, write_field
from services.grid import Grid
from services.norms import BesovParams, besov_norm, besov_seminorm, difference_scan, lp_block_scan, lp_norm
from services.reports import summarize, write_json
from services.scaling import write_scans_csv
from services.synth import KINDS, RoughFieldSpec, generate, taylor_green
from utils.config import CLAIMS, ExperimentConfig, load_config
from utils.error_handlers import EXIT_FAILED, EXIT_OK, handle_errors
from utils.validators import HypothesisValidator, require

# Load environment variables
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_NAME = 'besovflow.log'

logger = logging.getLogger('besovflow')


def configure_logging(out_dir: str) -> None:
    """Log to <out>/besovflow.log and the console"""
    os.makedirs(out_dir, exist_ok=True)
    logging.basicConfig(
        level=os.getenv('BESOVFLOW_LOG_LEVEL', 'INFO').upper(),
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(os.path.join(out_dir, LOG_NAME)),
            logging.StreamHandler()
        ],
        force=True
    )


def _setup(args: argparse.Namespace, **extra) -> ExperimentConfig:
    """Config file values, overridden by any flag that was given"""
    config = load_config(args.config).with_overrides(
        grid=args.grid,
        period=args.period,
        theta=args.theta,
        r=args.r,
        s=args.s,
        seed=args.seed,
        jmax=args.jmax,
        kind=args.kind,
        amplitude=args.amplitude,
        kernel=args.kernel,
        corpus_size=args.corpus,
        out=args.out,
        **extra
    )
    configure_logging(config.out)
    logger.info(f"Config {config.config_hash()}: {config.to_dict()}")
    return config


def _exit_code(reports) -> int:
    failed = [r.claim for r in reports if not r.passed]
    if failed:
        logger.warning(f"Failed claims: {', '.join(failed)}")
        return EXIT_FAILED
    logger.info(f"All {len(reports)} report(s) passed")
    return EXIT_OK


def _field_spec(config: ExperimentConfig, grid: Grid) -> RoughFieldSpec:
    jmax = grid.max_level() if config.jmax is None else config.jmax
    return RoughFieldSpec(config.theta, config.kind, jmax, config.seed, config.divergence_free, config.amplitude)


@handle_errors
def cmd_gen(args: argparse.Namespace) -> int:
    """Generate one synthetic field and write it as PFLD"""
    config = _setup(args, divergence_free=False if args.scalar else None)
    require(HypothesisValidator.validate_grid_spec(config.grid))
    grid = Grid.parse(config.grid, config.period)
    field = generate(_field_spec(config, grid), grid)
    path = args.output or os.path.join(config.out, f'field_{config.config_hash()}.pfld')
    write_field(field, path)
    logger.info(f"Generated {config.kind} field θ={config.theta} on {grid.describe()} -> {path}")
    return EXIT_OK


@handle_errors
def cmd_norm(args: argparse.Namespace) -> int:
    """Norms and per-scale scans of a PFLD field (or a freshly generated one)"""
    config = _setup(args)
    if args.input:
        field = read_field(args.input)
    else:
        grid = Grid.parse(config.grid, config.period)
        field = generate(_field_spec(config, grid), grid)

    lp_params = BesovParams(config.theta, config.r, estimator='littlewood_paley')
    diff_params = BesovParams(config.theta, config.r, estimator='difference')
    result = {
        'grid': field.grid.describe(),
        'components': field.components,
        'theta': config.theta,
        'r': config.r,
        'lp_norm': lp_norm(field, config.r),
        'seminorm_littlewood_paley': besov_seminorm(field, lp_params),
        'seminorm_difference': besov_seminorm(field, diff_params),
        'besov_norm': besov_norm(field, lp_params),
        'config_hash': config.config_hash(),
    }
    write_json(result, os.path.join(config.out, 'norm.json'))
    write_scans_csv([difference_scan(field, diff_params), lp_block_scan(field, config.r)],
                    os.path.join(config.out, 'norm_scans.csv'), config.config_hash())
    logger.info(f"Norms: L^r={result['lp_norm']:.6g}, [f]_LP={result['seminorm_littlewood_paley']:.6g}, "
                f"[f]_diff={result['seminorm_difference']:.6g}")
    return EXIT_OK


def _claim_command(claim: str):
    @handle_errors
    def command(args: argparse.Namespace) -> int:
        config = _setup(args, claim=claim)
        return _exit_code(run_experiments(config))
    command.__name__ = f"cmd_{claim.replace('-', '_')}"
    return command


@handle_errors
def cmd_kfun(args: argparse.Namespace) -> int:
    """Bilinear or trilinear K-inequality over a corpus"""
    config = _setup(args, claim=f'kfun-{args.mode}')
    return _exit_code(run_experiments(config))


@handle_errors
def cmd_euler(args: argparse.Namespace) -> int:
    """Integrate Euler, write snapshots and the invariants report"""
    config = _setup(args, dt=args.dt, t_end=args.t_end, stride=args.stride)
    grid = Grid.parse(config.grid, config.period)
    if args.initial == 'taylor-green':
        u0 = taylor_green(grid, config.amplitude)
    else:
        spec = RoughFieldSpec(config.theta, 'power-spectrum', 0 if config.jmax is None else config.jmax,
                              config.seed, True, config.amplitude)
        u0 = generate(spec, grid)

    run_dir = os.path.join(config.out, 'euler')
    run = run_euler(u0, config.dt, config.t_end, config.stride, run_dir, config.seed)
    report = run_invariants(run).with_hash(config.config_hash())
    report.write_json(os.path.join(config.out, 'euler-invariants.json'))
    return _exit_code([report])


@handle_errors
def cmd_timereg(args: argparse.Namespace) -> int:
    """Time-regularity claim on a synthetic series, or on a recorded run with --run"""
    config = _setup(args, claim='time-reg', time_claim=args.time_claim, beta=args.beta, epsilon=args.epsilon)
    if not args.run:
        return _exit_code(run_experiments(config))

    require(HypothesisValidator.validate_time_claim(config.time_claim, config.theta))
    report = pressure_time_regularity(load_run(args.run), config.time_claim, config.theta, config.s,
                                      config.r, config.beta, config.epsilon).with_hash(config.config_hash())
    report.write_json(os.path.join(config.out, f'time-reg-{config.time_claim}.json'))
    return _exit_code([report])


@handle_errors
def cmd_run(args: argparse.Namespace) -> int:
    """Run the claim named by --claim or the config file ('all' runs every claim)"""
    config = _setup(args, claim=args.experiment, gamma=args.gamma, beta=args.beta, epsilon=args.epsilon,
                    dt=args.dt, t_end=args.t_end, stride=args.stride)
    return _exit_code(run_experiments(config))


@handle_errors
def cmd_report(args: argparse.Namespace) -> int:
    """Merge every report under --out into summary.json"""
    config = _setup(args)
    summary = summarize(config.out)
    if not summary['count']:
        logger.warning(f"No reports found under {config.out}")
    return EXIT_OK if summary['pass'] else EXIT_FAILED


def _float(text: str) -> float:
    return float('inf') if text.lower() in ('inf', 'infinity') else float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='INI experiment config; flags override its values')
    common.add_argument('--out', help='Output directory (default: $BESOVFLOW_OUT or results)')
    common.add_argument('--grid', help="Grid spec such as '256x256' or '64x64x64'")
    common.add_argument('--period', type=float)
    common.add_argument('--theta', type=float, help='Spatial smoothness exponent θ')
    common.add_argument('--r', type=_float, help='Integrability exponent')
    common.add_argument('--s', type=_float, help='Time summability exponent')
    common.add_argument('--seed', type=int)
    common.add_argument('--jmax', type=int)
    common.add_argument('--kind', choices=KINDS)
    common.add_argument('--amplitude', type=float)
    common.add_argument('--kernel', choices=('gaussian_truncated', 'polynomial_bump'))
    common.add_argument('--corpus', type=int, help='Corpus size')

    parser = argparse.ArgumentParser(
        prog='besovflow',
        description='Besov regularity, K-functional and Euler pressure experiments'
    )
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', parents=[common], help='Generate a synthetic field')
    gen.add_argument('--output', help='PFLD path (default: <out>/field_<hash>.pfld)')
    gen.add_argument('--scalar', action='store_true', help='Scalar field instead of divergence-free velocity')
    gen.set_defaults(handler=cmd_gen)

    norm = sub.add_parser('norm', parents=[common], help='Norms of a field')
    norm.add_argument('--input', help='PFLD field; a synthetic field is generated if omitted')
    norm.set_defaults(handler=cmd_norm)

    sub.add_parser('mollify-scan', parents=[common], help='Mollification scaling laws') \
        .set_defaults(handler=_claim_command('molli'))
    sub.add_parser('pressure', parents=[common], help='Double regularity of the pressure') \
        .set_defaults(handler=_claim_command('pressure-double'))

    kfun = sub.add_parser('kfun', parents=[common], help='K-functional product inequalities')
    kfun.add_argument('--mode', choices=('bilinear', 'trilinear'), default='bilinear')
    kfun.set_defaults(handler=cmd_kfun)

    euler = sub.add_parser('euler', parents=[common], help='Integrate the Euler equations')
    euler.add_argument('--initial', choices=('taylor-green', 'random'), default='random')
    euler.add_argument('--dt', type=float)
    euler.add_argument('--t-end', dest='t_end', type=float)
    euler.add_argument('--stride', type=int)
    euler.set_defaults(handler=cmd_euler)

    timereg = sub.add_parser('timereg', parents=[common], help='Time regularity of u, p and ∂t p')
    timereg.add_argument('--claim', dest='time_claim', choices=HypothesisValidator.TIME_CLAIMS)
    timereg.add_argument('--beta', type=float)
    timereg.add_argument('--epsilon', type=float)
    timereg.add_argument('--run', help='Directory written by the euler subcommand')
    timereg.set_defaults(handler=cmd_timereg)

    run = sub.add_parser('run', parents=[common], help='Run one claim or all of them')
    run.add_argument('--claim', dest='experiment', choices=CLAIMS + ('all',))
    run.add_argument('--gamma', type=float)
    run.add_argument('--beta', type=float)
    run.add_argument('--epsilon', type=float)
    run.add_argument('--dt', type=float)
    run.add_argument('--t-end', dest='t_end', type=float)
    run.add_argument('--stride', type=int)
    run.set_defaults(handler=cmd_run)

    sub.add_parser('report', parents=[common], help='Summarize reports under --out') \
        .set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())
