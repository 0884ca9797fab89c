"""Pearson correlation of complexity metrics with the classification gap (216 models per repetition)."""
from _common import parse

from mvinfo.experiments.studies import run_correlation_study

cfg, args = parse("correlation", __doc__)
report = run_correlation_study(cfg)
report.write(args.out or cfg.output_dir, cfg.name)
for t in report.summary["tables"]:
    cells = "  ".join(f"{k} {'undef' if v is None else f'{v:+.3f}'}" for k, v in t["pearson"].items())
    print(f"rep {t['repetition']}: {cells}  pass={t['checks']['pass']}")
print(f"directional pass rate {report.summary['directional_pass_rate']:.2f}")
