"""Command line interface.

    adapt-gmm test --input tests.csv --alpha 0.1 --null point --out-dir results/test
    adapt-gmm simulate --scenario logistic-onesided --reps 5 --seed 7 --out-dir results/simlab

The test command exits with 0 when hypotheses were rejected, 2 when nothing was rejected and 1 on invalid input.

Attributes:
    EXIT_OK (int): Exit code of a successful run with rejections.
    EXIT_INPUT_ERROR (int): Exit code of invalid input or configuration.
    EXIT_NO_REJECTIONS (int): Exit code of a successful run without rejections.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from adapt_gmm.baselines.fdr import bh, storey_bh, storey_pi0
from adapt_gmm.classifier.models import ClassifierConfig
from adapt_gmm.cli.config import RunConfig, method_choices, symmetric_choices
from adapt_gmm.cli.io import InputError, read_input, rejection_frame, write_outputs
from adapt_gmm.configuration import defaults
from adapt_gmm.configuration.utilities import load_config
from adapt_gmm.engine.engine import run
from adapt_gmm.masking.hypotheses import NullType
from adapt_gmm.simlab.experiments import evaluate, method_names
from adapt_gmm.simlab.scenarios import LogisticSimConfig, get_scenario, scenario_names
from adapt_gmm.workmodel.gmm import EMConfig
from adapt_gmm.workmodel.policy import GmmRevealPolicy
from adapt_gmm.workmodel.selection import classifier_choices, criterion_names, default_candidates


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NO_REJECTIONS = 2


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers but found '{text}'")


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers but found '{text}'")


def _null_type(text: str) -> NullType:
    try:
        return NullType.parse(text)
    except ValueError as error:
        raise argparse.ArgumentTypeError(str(error))


def _add_model_arguments(parser: argparse.ArgumentParser, simulate: bool):
    parser.add_argument("--classes", type=_int_list, default=None if simulate else defaults.CLASSES,
                        help=f"Numbers of mixture components to select from (default: "
                             f"{','.join(map(str, defaults.CLASSES))}).")
    parser.add_argument("--classifier", choices=classifier_choices, default=None if simulate else defaults.CLASSIFIER,
                        help=f"Classifier of the spline candidates (default: {defaults.CLASSIFIER}).")
    parser.add_argument("--criterion", choices=criterion_names, default=None if simulate else defaults.CRITERION,
                        help=f"Information criterion of the model selection (default: {defaults.CRITERION}).")
    parser.add_argument("--seed", type=int, default=None if simulate else defaults.SEED,
                        help=f"Seed (default: {defaults.SEED}).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapt-gmm",
        description="Covariate-assisted multiple testing with FDR control by adaptive p-value thresholding.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at debug level.")
    commands = parser.add_subparsers(dest="command", required=True)

    test = commands.add_parser("test", help="Test the hypotheses of a CSV file.")
    test.add_argument("--input", required=True, help="CSV file with the columns id, p, z, se and covariates.")
    test.add_argument("--alpha", type=float, default=defaults.ALPHA,
                      help=f"Target FDR level (default: {defaults.ALPHA}).")
    test.add_argument("--null", type=_null_type, default=NullType.one_sided_right(),
                      help="point, one-sided-right, one-sided-left or interval:<delta> (default: one-sided-right).")
    test.add_argument("--method", choices=method_choices, default="adaptg", help="Procedure (default: adaptg).")
    test.add_argument("--mask-alpha-m", type=float, default=None, help="End of the red region (default: auto).")
    test.add_argument("--mask-lambda", type=float, default=None, help="Start of the blue region (default: auto).")
    test.add_argument("--mask-nu", type=float, default=None,
                      help=f"End of the blue region (default: {defaults.DEFAULT_NU}).")
    test.add_argument("--mask-shape", choices=["tent", "comb"], default=None,
                      help="Masking shape (default: comb for interval nulls, tent otherwise).")
    _add_model_arguments(test, simulate=False)
    test.add_argument("--hidden", type=int, default=defaults.HIDDEN_NODES,
                      help=f"Hidden nodes of the network classifier (default: {defaults.HIDDEN_NODES}).")
    test.add_argument("--symmetric", choices=symmetric_choices, default="auto",
                      help="Symmetric mixture components (default: auto, on for point nulls with z-values).")
    test.add_argument("--batch", type=int, default=None,
                      help=f"Reveal batch size (default: max(1, |M_0| // {defaults.BATCH_DIVISOR})).")
    test.add_argument("--out-dir", default="results/test", help="Output folder (default: results/test).")
    test.add_argument("--trace", action="store_true", help="Echo every step of the procedure to the log.")
    test.set_defaults(handler=cmd_test)

    simulate = commands.add_parser("simulate", help="Evaluate procedures on a simulation scenario.")
    simulate.add_argument("--scenario", choices=scenario_names, default=None,
                          help="Scenario (default: logistic-onesided, or the one of --config).")
    simulate.add_argument("--config", default=None, help="JSON run configuration with keys name and content.")
    simulate.add_argument("--methods", default=None,
                          help=f"Comma-separated methods from {method_names} (default: those of the scenario).")
    simulate.add_argument("--reps", type=int, default=None, help="Number of replications (default: 50).")
    simulate.add_argument("--n", type=int, default=None, help="Hypotheses per replication (default: scenario size).")
    simulate.add_argument("--alpha-grid", type=_float_list, default=None,
                          help="Comma-separated FDR levels (default: 0.05,0.1,0.2).")
    _add_model_arguments(simulate, simulate=True)
    simulate.add_argument("--workers", type=int, default=None,
                          help="Worker processes (default: half the cores, capped by ADAPTG_THREADS).")
    simulate.add_argument("--out-dir", default="results/simlab", help="Output folder (default: results/simlab).")
    simulate.set_defaults(handler=cmd_simulate)
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        alpha=args.alpha,
        null=args.null,
        method=args.method,
        alpha_m=args.mask_alpha_m,
        lam=args.mask_lambda,
        nu=args.mask_nu,
        shape=args.mask_shape,
        classes=tuple(args.classes),
        classifier=args.classifier,
        criterion=args.criterion,
        hidden=args.hidden,
        symmetric=args.symmetric,
        seed=args.seed,
        batch=args.batch,
        out_dir=args.out_dir,
        trace=args.trace,
    )


def cmd_test(args: argparse.Namespace) -> int:
    """Runs one procedure on an input file and writes rejections.csv, diagnostics.json and trace.csv."""
    config = run_config_from_args(args)
    table, covariates = read_input(args.input, config.null)
    diagnostics = {"method": config.method, "alpha": config.alpha, "null": str(config.null), "n": len(table),
                   "covariates": covariates}
    trace = None

    if config.method == "bh":
        result = bh(table.p, config.alpha)
        rejected = result.indices
        diagnostics["threshold"] = result.threshold
    elif config.method == "storey":
        result = storey_bh(table.p, config.alpha)
        rejected = result.indices
        diagnostics["threshold"] = result.threshold
        diagnostics["pi0"] = storey_pi0(table.p)
    else:
        params = config.masking_params(len(table))
        candidates = default_candidates(config.classes, defaults.SPLINE_DFS, config.classifier, config.hidden,
                                        has_covariates=len(covariates) > 0)
        em_config = EMConfig(seed=config.seed, classifier=ClassifierConfig(seed=config.seed))
        policy = GmmRevealPolicy(candidates=candidates, criterion=config.criterion, config=em_config,
                                 symmetric=config.symmetric_flag)
        logger.info("Masking with alpha_m=%.4g, lambda=%.4g, nu=%.4g, zeta=%.4g (%s), R_min=%d.", params.alpha_m,
                    params.lam, params.nu, params.zeta, params.shape.value, params.r_min(config.alpha))
        outcome = run(table, params, config.alpha, policy, batch_size=config.batch)
        rejected = outcome.rejected
        trace = outcome.trace_frame()
        if config.trace:
            for record in outcome.trace:
                logger.info("step %d: masked=%d A=%d R=%d fdp_hat=%.4g %s", record.step, record.masked,
                            record.a_count, record.r_count, record.fdp_hat, record.note)
        diagnostics.update({
            "masking": params.to_dict(),
            "r_min": params.r_min(config.alpha),
            "stop_step": outcome.stop_step,
            "notes": list(outcome.notes),
            "model": policy.diagnostics(),
        })

    diagnostics["rejections"] = len(rejected)
    write_outputs(config.out_dir, rejection_frame(table, rejected), diagnostics, trace)
    if len(rejected) == 0:
        logger.info("No rejections at alpha=%g.", config.alpha)
        return EXIT_NO_REJECTIONS
    logger.info("Rejected %d of %d hypotheses at alpha=%g.", len(rejected), len(table), config.alpha)
    return EXIT_OK


def simulation_config_from_args(args: argparse.Namespace) -> tuple:
    """Scenario name, LogisticSimConfig and methods from a JSON run configuration and the flags, flags winning."""
    content = {}
    if args.config is not None:
        try:
            content = dict(load_config(args.config, folder=".")["content"])
        except (OSError, ValueError, AssertionError) as error:
            raise InputError(f"--config: cannot load {args.config}: {error}")

    scenario = get_scenario(args.scenario or content.pop("scenario", "logistic-onesided"))
    content.pop("scenario", None)
    methods = content.pop("methods", None)
    if args.methods is not None:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    methods = tuple(methods) if methods else scenario.methods

    try:
        config = LogisticSimConfig.from_dict({**scenario.default_config().to_dict(), **content})
        overrides = {"replications": args.reps, "n": args.n, "alpha_grid": args.alpha_grid, "seed": args.seed,
                     "classes": args.classes, "classifier": args.classifier, "criterion": args.criterion}
        config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    except (TypeError, ValueError) as error:
        raise InputError(f"Simulation configuration: {error}")
    return scenario.name, config, methods


def cmd_simulate(args: argparse.Namespace) -> int:
    """Evaluates the methods on a scenario and writes report.csv and report.json."""
    scenario, config, methods = simulation_config_from_args(args)
    logger.info("Simulating %s with n=%d, %d replications, methods %s.", scenario, config.n, config.replications,
                ",".join(methods))
    report = evaluate(methods, config, scenario=scenario, max_workers=args.workers)
    report.save(args.out_dir)
    for row in report.summary().itertuples(index=False):
        logger.info("%-18s alpha=%-5g FDR=%.4f (%.4f) TPR=%.4f (%.4f) errors=%d", row.method, row.alpha, row.fdr,
                    row.fdr_se, row.tpr, row.tpr_se, row.errors)
    return EXIT_OK


def main(argv: Optional[Sequence[str]]=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (InputError, ValueError) as error:
        print(f"adapt-gmm: error: {error}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
