"""Batch command-line front-end.

Three subcommands: `sample` (emit chain states), `diagnose` (spectral radii,
TV decay curves, mixing times and ordering verdicts on a boxed target) and
`mimo` (BER-versus-iterations grids). Every command is a pure function of its
configuration and seeds: running twice with the same inputs produces
byte-identical output files.

Exit codes: 0 success, 2 configuration error, 3 runtime limit
(retry cap, state-space cap, permutation cap, non-convergence).
"""

import argparse
import json
import os
import re
import sys

import numpy as np

from . import diagnostics as dg
from . import mimo as mimo_mod
from .blocked import GkSampler
from .core import GaussianParams, builtin_basis, read_basis_file
from .errors import (ConfigError, NotConverged, PermutationSpaceTooLarge,
                     RetryCapExceeded, StateSpaceTooLarge)
from .tempering import TemperLadder, pt_run
from .univariate import GibbsSampler, MwgSampler

CONFIG_VERSION = 1

_RUNTIME_ERRORS = (RetryCapExceeded, StateSpaceTooLarge,
                   PermutationSpaceTooLarge, NotConverged)

_COMMON_KEYS = {"version", "command", "out", "format", "seed"}
_SAMPLE_KEYS = _COMMON_KEYS | {"basis", "sigma", "center", "sampler", "m",
                               "iterations", "burn_in", "thin", "tail_factor",
                               "retry_cap", "x0", "temps", "swap_stride"}
_DIAGNOSE_KEYS = _COMMON_KEYS | {"basis", "sigma", "center", "kinds", "box",
                                 "epsilon", "t_max"}
_MIMO_KEYS = _COMMON_KEYS | {"n", "qam", "snr_db", "samplers", "iterations",
                             "trials", "seeds", "sigma_rule", "retry_cap",
                             "temps", "swap_stride"}

_KEYS_BY_COMMAND = {"sample": _SAMPLE_KEYS, "diagnose": _DIAGNOSE_KEYS,
                    "mimo": _MIMO_KEYS}


def _load_config(path, command):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    declared = cfg.get("command", command)
    if declared != command:
        raise ConfigError(f"config is for command {declared!r}, not {command!r}")
    unknown = set(cfg) - _KEYS_BY_COMMAND[command]
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _merge(cfg, args, keys):
    merged = dict(cfg)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(cfg, key):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"missing required option {key!r}")
    return cfg[key]


def _parse_floats(text):
    return [float(tok) for tok in str(text).split(",") if tok != ""]


def _load_basis(name):
    if isinstance(name, str) and name.startswith("builtin:"):
        try:
            return builtin_basis(name.split(":", 1)[1])
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return read_basis_file(name)
    except OSError as exc:
        raise ConfigError(f"cannot read basis file {name!r}: {exc}") from exc


def _params(cfg, basis):
    sigma = float(_require(cfg, "sigma"))
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    center = cfg.get("center")
    center = np.zeros(basis.n) if center is None else np.array(_parse_floats(center))
    if center.shape != (basis.n,):
        raise ConfigError(f"center must have {basis.n} entries")
    return GaussianParams(sigma, center)


def _json_dump(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_sample(cfg):
    basis = _load_basis(_require(cfg, "basis"))
    params = _params(cfg, basis)
    kind = cfg.get("sampler", "gibbs")
    iterations = int(cfg.get("iterations", 1000))
    burn_in = int(cfg.get("burn_in", 0))
    thin = int(cfg.get("thin", 1))
    seed = int(cfg.get("seed", 0))
    tail = float(cfg.get("tail_factor", 12.0))
    retry_cap = int(cfg.get("retry_cap", 100))
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if iterations < burn_in or thin < 1 or iterations < 0:
        raise ConfigError("need iterations >= burn_in >= 0 and thin >= 1")
    out = _require(cfg, "out")

    if cfg.get("x0") is not None:
        x0 = np.array([int(v) for v in str(cfg["x0"]).split(",")], dtype=np.int64)
        if x0.shape != (basis.n,):
            raise ConfigError(f"x0 must have {basis.n} entries")
    else:
        x0 = np.round(np.linalg.solve(basis.b_matrix, params.center)).astype(np.int64)

    swap_rates = []
    match = re.fullmatch(r"gk(\d*)", kind)
    if kind in ("gibbs", "mwg"):
        cls = GibbsSampler if kind == "gibbs" else MwgSampler
        sampler = cls(basis, params, tail_factor=tail)
        run, _ = sampler.run(sampler.initial_state(x0), iterations, burn_in,
                             thin, rng=np.random.default_rng(seed))
    elif match:
        m = int(cfg.get("m", match.group(1) or 2))
        sampler = GkSampler(basis, params, block_size=m, retry_cap=retry_cap,
                            tail_factor=tail)
        run, _ = sampler.run(sampler.initial_state(x0), iterations, burn_in,
                             thin, rng=np.random.default_rng(seed))
    elif kind == "pt":
        temps = tuple(_parse_floats(cfg.get("temps", "1,2")))
        stride = int(cfg.get("swap_stride", 1))
        try:
            ladder = TemperLadder(temps, swap_stride=stride)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        children = np.random.SeedSequence(seed).spawn(ladder.m + 1)
        pt, _ = pt_run(ladder, lambda p: MwgSampler(basis, p, tail_factor=tail),
                       basis, params, x0, iterations, burn_in, thin,
                       chain_seeds=children[:-1], swap_seed=children[-1])
        cold = pt.chain_attempts[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            rates = np.where(cold > 0, pt.chain_accepts[0] / cold, 1.0)
        run = _PtSampleRun(samples=pt.samples, rates=rates,
                           degenerate=pt.chain_degenerate[0])
        swap_rates = [float(v) for v in pt.swap_rates()]
    else:
        raise ConfigError(
            f"unknown sampler {kind!r} (expected gibbs, mwg, gk or pt)")

    if fmt == "json":
        _json_dump(out, {"samples": run.samples.tolist()})
    else:
        with open(out, "w") as fh:
            for row in run.samples:
                fh.write(",".join(str(int(v)) for v in row) + "\n")
    sidecar = {
        "sampler": kind,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "seed": seed,
        "emitted": int(run.samples.shape[0]),
        "acceptance_rates": [float(v) for v in run.acceptance_rates()],
        "degeneracy_counts": [int(v) for v in run.degenerate],
        "gk_retries": int(run.retries),
        "swap_rates": swap_rates,
    }
    _json_dump(out + ".meta.json", sidecar)
    return 0


class _PtSampleRun:
    """Adapter giving pt_run output the sidecar-facing ChainRun surface."""

    retries = 0

    def __init__(self, samples, rates, degenerate):
        self.samples = samples
        self._rates = rates
        self.degenerate = degenerate

    def acceptance_rates(self):
        return self._rates


_KIND_RE = re.compile(r"^(gibbs|mwg|gk(\d+))$")


def cmd_diagnose(cfg):
    basis = _load_basis(_require(cfg, "basis"))
    params = _params(cfg, basis)
    kinds = cfg.get("kinds", "gibbs,mwg,gk1,gk2")
    kinds = [k.strip() for k in str(kinds).split(",") if k.strip()]
    out = _require(cfg, "out")
    t_max = int(cfg.get("t_max", 200))
    epsilon = cfg.get("epsilon")
    if cfg.get("box") is not None:
        radii = [int(v) for v in str(cfg["box"]).split(",")]
        if len(radii) == 1:
            radii = radii * basis.n
        if len(radii) != basis.n:
            raise ConfigError(f"box needs 1 or {basis.n} radii")
        mid = np.round(np.linalg.solve(basis.b_matrix, params.center)).astype(np.int64)
        box = dg.Box(mid - np.array(radii), mid + np.array(radii))
    else:
        box = dg.default_box(basis, params)

    target = dg.enumerate_target(basis, params, box)
    corner = tuple(int(v) for v in box.lo)
    records = []
    rhos = {}
    for kind in kinds:
        match = _KIND_RE.match(kind)
        if not match:
            raise ConfigError(f"unknown diagnostic kind {kind!r}")
        if match.group(2):
            kernel = dg.build_kernel("gk", basis, params, box, m=int(match.group(2)))
        else:
            kernel = dg.build_kernel(kind, basis, params, box)
        report = dg.spectral_radius_forward(kernel, target)
        rhos[kind] = report.rho
        record = dg.spectral_record(kind, basis, params, box, report)
        curve = dg.tv_decay_curve(kernel, target, corner, t_max)
        decay_path = f"{out}_{kind}_decay.csv"
        dg.write_decay_csv(decay_path, curve)
        record["decay_csv"] = os.path.basename(decay_path)
        record["decay_tail_slope"] = curve.tail_slope
        if epsilon is not None:
            record["t_mix"] = dg.estimate_mixing(kernel, target, float(epsilon))
        records.append(record)

    verdicts = {}
    if "gibbs" in rhos and "mwg" in rhos:
        verdicts["mwg_leq_gibbs"] = bool(rhos["mwg"] <= rhos["gibbs"] + 1e-9)
    gk_ms = sorted((int(k[2:]), k) for k in rhos if k.startswith("gk"))
    if len(gk_ms) >= 2:
        values = [rhos[k] for _, k in gk_ms]
        verdicts["gk_monotone"] = bool(
            all(b <= a + 1e-9 for a, b in zip(values, values[1:])))
    payload = {
        "version": CONFIG_VERSION,
        "sigma": params.sigma,
        "box": [[int(l), int(h)] for l, h in zip(box.lo, box.hi)],
        "reports": records,
        "verdicts": verdicts,
    }
    _json_dump(out + ".json", payload)
    return 0


def _parse_sampler_specs(cfg):
    names = cfg.get("samplers", "gibbs,mwg,gk2")
    if isinstance(names, str):
        names = [s.strip() for s in names.split(",") if s.strip()]
    temps = tuple(_parse_floats(cfg.get("temps", "1,2")))
    stride = cfg.get("swap_stride")
    specs = []
    for name in names:
        match = re.fullmatch(r"gk(\d+)", name)
        if name in ("gibbs", "mwg", "klein"):
            specs.append(mimo_mod.SamplerSpec(name))
        elif match:
            specs.append(mimo_mod.SamplerSpec("gk", m=int(match.group(1))))
        elif name == "pt":
            specs.append(mimo_mod.SamplerSpec(
                "pt", temps=temps,
                swap_stride=int(stride) if stride is not None else None))
        else:
            raise ConfigError(f"unknown sampler {name!r}")
    return specs


def cmd_mimo(cfg):
    out = _require(cfg, "out")
    snr = cfg.get("snr_db", "14")
    snr = _parse_floats(snr) if isinstance(snr, str) else [float(s) for s in snr]
    iterations = cfg.get("iterations", "0,1,2,4,8")
    if isinstance(iterations, str):
        iterations = [int(v) for v in iterations.split(",")]
    trials = int(cfg.get("trials", 100))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seeds = cfg.get("seeds")
    try:
        config = mimo_mod.MimoConfig(
            n=int(cfg.get("n", 4)),
            qam_order=int(cfg.get("qam", 16)),
            snr_db=tuple(snr),
            samplers=tuple(_parse_sampler_specs(cfg)),
            iterations=tuple(iterations),
            trials=trials,
            seed=int(cfg.get("seed", 0)),
            seeds=tuple(int(s) for s in seeds) if seeds is not None else None,
            sigma_rule=cfg.get("sigma_rule", "klein"),
            retry_cap=int(cfg.get("retry_cap", 100000)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = mimo_mod.ber_experiment(config)
    mimo_mod.write_ber_csv(out, rows)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lattice-gibbs",
        description="Lattice Gaussian sampling, convergence diagnostics and "
                    "MIMO detection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output path (or prefix)")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=["csv", "json"])

    p_sample = sub.add_parser("sample", parents=[common],
                              help="emit chain states from one sampler")
    p_sample.add_argument("--basis", help="builtin:NAME or a basis file")
    p_sample.add_argument("--sigma", type=float)
    p_sample.add_argument("--center", help="comma-separated reals")
    p_sample.add_argument("--sampler", help="gibbs | mwg | gk | pt")
    p_sample.add_argument("--m", type=int, help="block size for gk")
    p_sample.add_argument("--iterations", type=int)
    p_sample.add_argument("--burn-in", dest="burn_in", type=int)
    p_sample.add_argument("--thin", type=int)
    p_sample.add_argument("--tail-factor", dest="tail_factor", type=float)
    p_sample.add_argument("--retry-cap", dest="retry_cap", type=int)
    p_sample.add_argument("--x0", help="comma-separated integers")
    p_sample.add_argument("--temps", help="pt ladder, comma list")
    p_sample.add_argument("--swap-stride", dest="swap_stride", type=int)

    p_diag = sub.add_parser("diagnose", parents=[common],
                            help="spectral and TV diagnostics on a boxed target")
    p_diag.add_argument("--basis")
    p_diag.add_argument("--sigma", type=float)
    p_diag.add_argument("--center")
    p_diag.add_argument("--kinds", help="comma list, e.g. gibbs,mwg,gk2")
    p_diag.add_argument("--box", help="radius (or comma list per dimension)")
    p_diag.add_argument("--epsilon", type=float, help="report mixing times")
    p_diag.add_argument("--t-max", dest="t_max", type=int)

    p_mimo = sub.add_parser("mimo", parents=[common],
                            help="BER vs iterations experiment grid")
    p_mimo.add_argument("--n", type=int)
    p_mimo.add_argument("--qam", type=int)
    p_mimo.add_argument("--snr-db", dest="snr_db", help="comma list of dB values")
    p_mimo.add_argument("--samplers", help="comma list: gibbs,mwg,gk2,pt,klein")
    p_mimo.add_argument("--iterations", help="comma list of iteration counts")
    p_mimo.add_argument("--trials", type=int)
    p_mimo.add_argument("--sigma-rule", dest="sigma_rule")
    p_mimo.add_argument("--retry-cap", dest="retry_cap", type=int)
    p_mimo.add_argument("--temps", help="pt ladder, comma list")
    p_mimo.add_argument("--swap-stride", dest="swap_stride", type=int)

    return parser


_DISPATCH = {"sample": (cmd_sample, _SAMPLE_KEYS),
             "diagnose": (cmd_diagnose, _DIAGNOSE_KEYS),
             "mimo": (cmd_mimo, _MIMO_KEYS)}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    runner, keys = _DISPATCH[args.command]
    try:
        cfg = _load_config(args.config, args.command)
        cfg = _merge(cfg, args, keys)
        return runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _RUNTIME_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
