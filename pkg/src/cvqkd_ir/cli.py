"""Command-line drivers: ``fig3``, ``fig4``, ``fig5`` and ``run``.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when channel
estimation fails.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .attacks import AttackSpec
from .estimation import EstimationError, eps_confidence
from .experiment import (
    FIG3_COLUMNS,
    FIG4_COLUMNS,
    FIG5_COLUMNS,
    BlockConfig,
    Calibration,
    fig3_table,
    fig4_table,
    fig5_table,
    key_accepted,
    run_block,
)
from .optics import DetectorModel, ModulationParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3

log = logging.getLogger("cvqkd_ir")

DEFAULT_T_GRID = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
DEFAULT_MU_GRID = "0,0.25,0.5,0.75,1"
DEFAULT_FIG5_T = "0.1,0.25,0.9"
DEFAULT_FIG5_MU = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1"

RUN_COLUMNS = (
    "block", "T", "mu", "eps_T", "T_hat", "chi_hat", "chi0_hat", "eps_hat", "se_eps", "eps_conf",
    "I_AB_g", "I_AB_ng", "I_BE_bs", "I_BE_ir", "I_BE_partial", "I_BE_g", "K", "key_bits", "accepted",
)


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _u64(text: str) -> int:
    v = int(text, 0)
    if not (0 <= v < 2**64):
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return v


def _fmt(v) -> str:
    # str() of a Python float is the shortest round-trip decimal.
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, columns, out) -> None:
    """Write dataclass or dict rows, keeping only ``columns`` in that order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = r if isinstance(r, dict) else asdict(r)
        w.writerow([_fmt(d[c]) for c in columns])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _common(p: argparse.ArgumentParser, blocks: int) -> None:
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--blocks", type=int, default=blocks, help="blocks per sweep point")
    p.add_argument("--va", type=float, default=36.6, help="modulation variance V_A (N0)")
    p.add_argument("--eta", type=float, default=0.6, help="Bob's homodyne efficiency")
    p.add_argument("--eps-t", type=float, default=0.1, help="technical excess noise (N0, input referred)")
    p.add_argument("--reveal-m", type=int, default=5000, help="pulses revealed per block")
    p.add_argument("--beta", type=float, default=1.0, help="reconciliation efficiency")
    p.add_argument("--nsigma", type=float, default=1.0, help="security margin in standard errors")
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for block simulation")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvqkd-ir", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    f3 = sub.add_parser("fig3", help="excess noise of a full IR attack versus T")
    _common(f3, blocks=20)
    f3.add_argument("--t-grid", type=parse_grid, default=parse_grid(DEFAULT_T_GRID))

    f4 = sub.add_parser("fig4", help="excess noise versus interception fraction")
    _common(f4, blocks=10)
    f4.add_argument("--mu-grid", type=parse_grid, default=parse_grid(DEFAULT_MU_GRID))
    f4.add_argument("--t-grid", type=parse_grid, default=parse_grid(DEFAULT_T_GRID))

    f5 = sub.add_parser("fig5", help="information rates versus excess noise")
    _common(f5, blocks=20)
    f5.add_argument("--t-grid", type=parse_grid, default=parse_grid(DEFAULT_FIG5_T))
    f5.add_argument("--mu-grid", type=parse_grid, default=parse_grid(DEFAULT_FIG5_MU))

    r = sub.add_parser("run", help="end-to-end simulation from a key=value config file")
    r.add_argument("config", type=Path)
    r.add_argument("--out", default=None, help="CSV path (overrides the config 'out' key)")
    return p


def _calib(args) -> Calibration:
    return Calibration(
        mod=ModulationParams(args.va),
        det=DetectorModel(args.eta),
        beta=args.beta,
        n_sigma=args.nsigma,
    )


def _block_cfg(args, **kw) -> BlockConfig:
    return BlockConfig(reveal_m=args.reveal_m, blocks=args.blocks, seed=args.seed, **kw)


# Config keys mirror the long flag names; "mu" and "t" describe the attack.
RUN_DEFAULTS = {
    "seed": "0",
    "blocks": "1",
    "va": "36.6",
    "eta": "0.6",
    "eps-t": "0.1",
    "reveal-m": "5000",
    "beta": "1.0",
    "nsigma": "1.0",
    "mu": "0.0",
    "t": "0.5",
    "pulses-per-block": "50000",
    "test-pulses": "10000",
    "margin": "0.0",
    "out": "",
}


def load_run_config(path: Path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments allowed)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), delimiters=("=", ":"))
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    raw = dict(cp["run"])
    unknown = sorted(set(raw) - set(RUN_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {**RUN_DEFAULTS, **raw}
    try:
        return {
            "seed": int(merged["seed"], 0),
            "blocks": int(merged["blocks"]),
            "va": float(merged["va"]),
            "eta": float(merged["eta"]),
            "eps_t": float(merged["eps-t"]),
            "reveal_m": int(merged["reveal-m"]),
            "beta": float(merged["beta"]),
            "nsigma": float(merged["nsigma"]),
            "mu": float(merged["mu"]),
            "T": float(merged["t"]),
            "pulses_per_block": int(merged["pulses-per-block"]),
            "test_pulses": int(merged["test-pulses"]),
            "margin": float(merged["margin"]),
            "out": merged["out"] or None,
        }
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from None


def cmd_run(config: Path, out=None, stream=None) -> int:
    stream = stream or sys.stdout
    c = load_run_config(config)
    cfg = BlockConfig(
        pulses_per_block=c["pulses_per_block"],
        test_pulses=c["test_pulses"],
        reveal_m=c["reveal_m"],
        blocks=c["blocks"],
        seed=c["seed"],
    )
    spec = AttackSpec(mu=c["mu"], T=c["T"], eps_T=c["eps_t"])
    det, mod = DetectorModel(c["eta"]), ModulationParams(c["va"])

    print("# parameters", file=stream)
    for k, v in c.items():
        print(f"  {k:<16} {v}", file=stream)
    print(f"  {'key_pulses':<16} {cfg.key_pulses} per block", file=stream)

    rows = []
    for b in range(cfg.blocks):
        est, rep = run_block(cfg, spec, det, mod, block_index=b, beta=c["beta"], n_sigma=c["nsigma"])
        ok = key_accepted(rep, c["margin"])
        rows.append({
            "block": b, "T": spec.T, "mu": spec.mu, "eps_T": spec.eps_T,
            **asdict(est), "eps_conf": eps_confidence(est, c["nsigma"]),
            **asdict(rep), "key_bits": max(rep.K, 0.0) * cfg.key_pulses, "accepted": ok,
        })
        print(
            f"block {b}: T_hat={est.T_hat:.4f} eps_hat={est.eps_hat:.4f}+-{est.se_eps:.4f} "
            f"I_AB={rep.I_AB_g:.4f} I_BE={rep.I_BE_g:.4f} K={rep.K:.4f} bits/pulse "
            f"-> {'ACCEPT' if ok else 'REJECT'}",
            file=stream,
        )
    verdict = all(r["accepted"] for r in rows)
    print(f"verdict: {'ACCEPT' if verdict else 'REJECT'} (K > {c['margin']} required in every block)", file=stream)
    target = out or c["out"]
    if target:
        write_csv(rows, RUN_COLUMNS, target)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cmd == "run":
            return cmd_run(args.config, args.out)
        calib = _calib(args)
        if args.cmd == "fig3":
            rows = fig3_table(args.t_grid, _block_cfg(args), calib, eps_T=args.eps_t, workers=args.workers)
            write_csv(rows, FIG3_COLUMNS, args.out)
        elif args.cmd == "fig4":
            rows = fig4_table(args.mu_grid, args.t_grid, _block_cfg(args), calib, eps_T=args.eps_t, workers=args.workers)
            write_csv(rows, FIG4_COLUMNS, args.out)
        elif args.cmd == "fig5":
            rows = fig5_table(args.t_grid, args.mu_grid, _block_cfg(args), calib, eps_T=args.eps_t)
            write_csv(rows, FIG5_COLUMNS, args.out)
            bad = [r for r in rows if not r.ordering_ok]
            if bad:
                log.warning("attack ordering violated at %d grid points", len(bad))
    except EstimationError as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
