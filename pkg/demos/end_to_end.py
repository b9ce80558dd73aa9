"""Simulate a regime-4 dataset, calibrate thresholds on a matched null chain,
then test and scan for disease predisposing loci.

    python3 demos/end_to_end.py [iterations]
"""
import sys
import tempfile

from hdpcc import RunConfig
from hdpcc.gibbs import Model
from hdpcc.inference import calibrate_thresholds, dpl_scan, run_tests
from hdpcc.parallel import fit
from hdpcc.simgen import Dims, generate_null, generate_regime

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
cfg = RunConfig(M=10, iterations=iters, burnin=iters // 5, thin=5, seed=7)
dims = Dims(J=2, Lj=20, N0=20, N1=20, M=10)

with tempfile.TemporaryDirectory() as tmp:
    tensor, env = generate_null(dims, cfg, seed=1007)
    null = fit(Model(tensor, env, cfg), out=f"{tmp}/null")
    th = calibrate_thresholds(null.traces, cfg.eps_quantile)

    ds = generate_regime(4, dims, seed=7, config=cfg)
    res = fit(Model(ds.tensor, ds.env, cfg), out=f"{tmp}/fit")
    print(run_tests(res.traces, th).summary())
    for g, (j, r) in zip(dpl_scan(res.traces), sorted(ds.dpl.items())):
        flagged = [int(x) + 1 for x in g.flags.nonzero()[0]]
        print(f"{g.gene}: planted locus {r + 1}, flagged {flagged}")
