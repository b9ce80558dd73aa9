"""`hdpcc` command line: simulate, fit, calibrate, test, dpl.

Exit codes: 0 success, 2 usage, 3 validation, 4 numeric/truncation, 5 integrity.
"""
import argparse
import logging
import os
import sys
import warnings

from .data.config import RunConfig, dump_config, load_config
from .data.genotypes import load_environment, load_genotypes
from .data.traces import Traces
from .errors import HdpccError, ValidationError
from .gibbs import Model
from .inference import Thresholds, calibrate_thresholds, dpl_scan, run_tests, write_dpl
from .parallel import RunAborted, fit as run_fit, plan, resume as run_resume
from .simgen import generate_null, generate_regime, parse_dims

log = logging.getLogger("hdpcc")


def _existing(parser, path, what):
    if path is not None and not os.path.exists(path):
        parser.error(f"{what} not found: {path}")


def _config(path):
    return load_config(path) if path else RunConfig()


def _effects(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"effect needs key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k == "mixing":
            out[k] = tuple(float(x) for x in v.split(":"))
        else:
            out[k] = float(v)
    return out


def cmd_simulate(args, parser):
    _existing(parser, args.config, "config")
    cfg = _config(args.config)
    dims = parse_dims(args.dims)
    ds = generate_regime(args.regime, dims, _effects(args.effect), args.seed, cfg)
    ds.write(args.out)
    log.info("wrote regime %d dataset (%d individuals, %d genes) to %s",
             args.regime, ds.tensor.N, ds.tensor.J, args.out)


def _overrides(cfg, args):
    kw = {}
    for name in ("workers", "iterations", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return cfg.replace(**kw).validate() if kw else cfg


def cmd_fit(args, parser):
    for p, what in ((args.geno, "genotype file"), (args.env, "environment file"),
                    (args.config, "config"), (args.resume, "snapshot")):
        _existing(parser, p, what)
    cfg = _overrides(_config(args.config), args)
    tensor = load_genotypes(args.geno)
    env = load_environment(args.env, tensor)
    model = Model(tensor, env, cfg)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.txt"), "w") as f:
        f.write(dump_config(cfg))
    if args.resume:
        res = run_resume(args.out, model, plan(cfg, model), cfg.iterations, snapshot=args.resume)
    else:
        res = run_fit(model, out=args.out)
    log.info("finished at sweep %d; snapshot %s", res.state.sweep, res.snapshot)


def cmd_calibrate(args, parser):
    _existing(parser, args.config, "config")
    cfg = _overrides(_config(args.config), args)
    dims = parse_dims(args.dims)
    if dims.M != cfg.M:
        dims.M = cfg.M
    tensor, env = generate_null(dims, cfg, cfg.seed)
    null_dir = os.path.join(args.out, "null_chain")
    res = run_fit(Model(tensor, env, cfg), out=null_dir)
    q = cfg.eps_quantile if args.q is None else args.q
    th = calibrate_thresholds(res.traces, q)
    th.write(os.path.join(args.out, "epsilons.csv"))
    log.info("calibrated %d thresholds at q=%g", len(th.values), q)


def cmd_test(args, parser):
    _existing(parser, args.traces, "trace directory")
    _existing(parser, args.epsilons, "epsilon file")
    traces = Traces.read(args.traces)
    report = run_tests(traces, Thresholds.read(args.epsilons))
    report.write(args.out)
    sys.stdout.write(report.summary())


def cmd_dpl(args, parser):
    _existing(parser, args.traces, "trace directory")
    traces = Traces.read(args.traces)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = dpl_scan(traces)
    for w in caught:
        log.warning("%s", w.message)
    os.makedirs(args.out, exist_ok=True)
    write_dpl(result, os.path.join(args.out, "dpl.csv"))
    for g in result:
        loci = [str(r + 1) for r in range(g.flags.size) if g.flags[r]]
        sys.stdout.write(f"{g.gene}: flagged loci {' '.join(loci) or 'none'}\n")


def build_parser():
    p = argparse.ArgumentParser(prog="hdpcc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--regime", type=int, required=True, choices=range(1, 6))
    s.add_argument("--dims", required=True, help="e.g. J=2,L=40,N0=30,N1=30,M=10")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--effect", action="append", metavar="KEY=VALUE",
                   help="override an effect size (dpl_shift, env_shift, env_beta, "
                        "gene_weight, env_weight, noise, mixing=a:b:...)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the sampler and write traces")
    f.add_argument("--geno", required=True)
    f.add_argument("--env", required=True)
    f.add_argument("--config")
    f.add_argument("--out", required=True)
    f.add_argument("--resume", metavar="SNAPSHOT")
    f.add_argument("--workers", type=int)
    f.add_argument("--iterations", type=int)
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("calibrate", help="fit null data and emit thresholds")
    c.add_argument("--dims", required=True)
    c.add_argument("--config")
    c.add_argument("--out", required=True)
    c.add_argument("--q", type=float)
    c.add_argument("--workers", type=int)
    c.add_argument("--iterations", type=int)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("test", help="posterior probabilities and verdicts")
    t.add_argument("--traces", required=True)
    t.add_argument("--epsilons", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_test)

    d = sub.add_parser("dpl", help="per-locus distances and top-2%% flags")
    d.add_argument("--traces", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dpl)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args, parser)
    except RunAborted as e:
        sys.stderr.write(f"error: {e}\n")
        if e.snapshot:
            sys.stderr.write(f"last durable snapshot: {e.snapshot}\n")
        return e.exit_code
    except HdpccError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
