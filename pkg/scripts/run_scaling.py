"""Log-log slopes of the bound terms and of the measured gap against nm."""
from _common import parse

from mvinfo.experiments.studies import run_scaling_study

cfg, args = parse("scaling", __doc__)
report = run_scaling_study(cfg, workers=args.workers)
report.write(args.out or cfg.output_dir, cfg.name)
s = report.summary
for k, v in s["frozen_slopes"].items():
    print(f"frozen {k}: {v['slope']:.6f}")
for k, v in s["live_bound_slopes"].items():
    print(f"live {k}: {v['slope']:.4f} +- {v['stderr']:.4f}")
print(f"measured gap slope: {s['gap_slope']['slope']}")
print(f"delta_sup enumeration mean (n={s['delta_sup_enumeration']['n']}): {s['delta_sup_enumeration']['mean']}")
