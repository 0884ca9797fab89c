import argparse

from mvinfo.experiments.configs import apply_overrides, default_config, load_config


def parse(name: str, description: str):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help=f"config JSON (default: shipped '{name}')")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("overrides", nargs="*", help="key=value config overrides")
    args = p.parse_args()
    cfg = load_config(args.config) if args.config else default_config(name)
    cfg = apply_overrides(cfg, args.overrides)
    return cfg, args
