"""Coverage of Theorems 1, 3 and 7 on the default (n, m) grid."""
from _common import parse

from mvinfo.experiments.studies import run_bound_validation

cfg, args = parse("validation", __doc__)
report = run_bound_validation(cfg, workers=args.workers)
report.write(args.out or cfg.output_dir, cfg.name)
fmt = lambda v: "  -  " if v is None else f"{v:.3f}"
for cell in report.summary["cells"].values():
    print(f"n={cell['n']:4d} m={cell['m']}  T1 {fmt(cell['coverage_t1'])}  T3 {fmt(cell['coverage_t3'])}  "
          f"T7 {fmt(cell['coverage_t7'])}  interpolating {cell['interpolating']}/{cell['replicates']}")
print(f"min coverage {report.summary['min_coverage']:.3f} (target {report.summary['target_coverage']:.2f})")
