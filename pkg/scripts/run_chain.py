"""Repeated plug-in estimates of I(phi; U~) <= I(phi; U) <= I(phi; S) on the count-table trainer."""
from _common import parse

from mvinfo.experiments.studies import run_chain_study

cfg, args = parse("chain", __doc__)
report = run_chain_study(cfg)
report.write(args.out or cfg.output_dir, cfg.name)
for r in report.records:
    print(f"study {r['study']:2d}: I(phi;U~) {r['mi_phi_usup']:.4f}  I(phi;U) {r['mi_phi_u']:.4f}  "
          f"I(phi;S) {r['mi_phi_s']:.4f}  holds={r['holds']}")
print(f"hold rate {report.summary['hold_rate']:.2f}")
