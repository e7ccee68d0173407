"""Experiment runner.

Subcommands reproduce the two case-study sweeps and the scenario runs:

    isacguard auth_sweep   --seed 42 --out auth.csv
    isacguard keygen_sweep --seed 42 --out keygen.csv
    isacguard anomaly_run  --seed 42 --out flags.csv [--config cfg.ini]
    isacguard e2e          --seed 42 --out events.jsonl

``--config`` points at an INI file (documented in the README); command-line
flags override it.  Seeds are always explicit.  ``--check`` additionally
runs the built-in acceptance assertions for the subcommand and exits 4 on
violation.  Exit codes: 0 ok, 2 config error, 3 I/O error, 4 check failure.

Every output file starts with a comment line recording the seed, a digest
of the effective configuration, the tool version and the active kernel
backend, followed by the CSV header.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import sys

import numpy as np

from . import __version__, kernels
from .authfusion import CostModel, TrafficMix, complexity_sweep, perfect_estimation_rho
from .keyforge import KeygenGeometry, agreement_sweep, agreement_threshold
from .scenario import (
    AttackKind,
    AttackSpec,
    PolicyConfig,
    event_log_digest,
    intersection_config,
    run_e2e,
    generate_trace,
    inject_attack,
)
from .sentinel import AnomalyEngine

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CHECK = 4


class ConfigError(Exception):
    pass


class CheckFailure(Exception):
    pass


# ---------------------------------------------------------------- defaults

AUTH_DEFAULTS = {
    "gammas": "0.5,1,2,3,4,6,8,12,16,20",
    "snrs_db": "-10,10,40",
    "registered_angle_deg": "10.0",
    "legit_fraction": "0.5",
    "eve_angle_min_deg": "-60.0",
    "eve_angle_max_deg": "60.0",
    "pla_cost_ratio": "0.001",
    "grid_step_deg": "0.1",
}

KEYGEN_DEFAULTS = {
    "snr_min_db": "-20",
    "snr_max_db": "80",
    "snr_step_db": "5",
    "key_lens": "3,6",
    "raw_bits": "16",
    "grid_step_deg": "0.05",
    "cluster_center_deg": "10.0",
    "cluster_jitter_std_deg": "1.0",
    "weak_path_angle_deg": "-20.0",
    "weak_path_gain_db": "-10.0",
}

SCENARIO_DEFAULTS = {
    "duration_s": "5.0",
    "step_s": "0.1",
    "snr_db": "20.0",
    "attacks": "",
}

POLICY_DEFAULTS = {
    "adapt": "true",
    "initial_gamma_deg": "6.0",
    "trust_decay": "0.1",
    "penalty_gain": "0.5",
    "trust_threshold": "0.5",
}


def _load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.read_dict(
        {
            "auth": AUTH_DEFAULTS,
            "keygen": KEYGEN_DEFAULTS,
            "scenario": SCENARIO_DEFAULTS,
            "policy": POLICY_DEFAULTS,
        }
    )
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
        except configparser.Error as e:
            raise ConfigError(f"malformed config file: {e}") from e
    return cp


def _config_digest(cp: configparser.ConfigParser, seed: int, trials: int) -> str:
    lines = [f"seed={seed}", f"trials={trials}"]
    for section in sorted(cp.sections()):
        for key, value in sorted(cp.items(section)):
            lines.append(f"{section}.{key}={value}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def _floats(raw: str) -> list[float]:
    try:
        return [float(x) for x in raw.replace(" ", "").split(",") if x]
    except ValueError as e:
        raise ConfigError(f"bad numeric list {raw!r}") from e


def _ints(raw: str) -> list[int]:
    return [int(x) for x in _floats(raw)]


def _write_rows(path: str, columns: list[str], rows: list[list], comment: str):
    try:
        with open(path, "w") as fh:
            fh.write(comment + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def _comment(seed: int, digest: str) -> str:
    return f"# seed={seed} config_sha256={digest} version={__version__} backend={kernels.active_backend()}"


def _parse_attacks(raw: str) -> list[AttackSpec]:
    """Parse 'kind:start:end[:key=val;key=val]' attack descriptors."""
    specs = []
    for item in [x.strip() for x in raw.split(",") if x.strip()]:
        parts = item.split(":")
        if len(parts) < 3:
            raise ConfigError(f"attack spec {item!r} needs kind:start:end")
        try:
            kind = AttackKind(parts[0])
        except ValueError as e:
            raise ConfigError(f"unknown attack kind {parts[0]!r}") from e
        try:
            start, end = float(parts[1]), float(parts[2])
        except ValueError as e:
            raise ConfigError(f"bad attack window in {item!r}") from e
        params: dict = {}
        if len(parts) > 3 and parts[3]:
            for kv in parts[3].split(";"):
                key, _, val = kv.partition("=")
                if not key or not val:
                    raise ConfigError(f"bad attack parameter {kv!r}")
                if val.lower() in ("true", "false"):
                    params[key] = val.lower() == "true"
                else:
                    try:
                        params[key] = float(val)
                    except ValueError:
                        params[key] = val
        try:
            specs.append(AttackSpec(kind=kind, start_s=start, end_s=end, params=params))
        except ValueError as e:
            raise ConfigError(str(e)) from e
    return specs


# ---------------------------------------------------------------- commands

def _cmd_auth_sweep(args, cp) -> int:
    sect = cp["auth"]
    gammas = _floats(sect["gammas"])
    snrs = _floats(sect["snrs_db"])
    mix = TrafficMix(
        legit_fraction=float(sect["legit_fraction"]),
        eve_angle_min_deg=float(sect["eve_angle_min_deg"]),
        eve_angle_max_deg=float(sect["eve_angle_max_deg"]),
    )
    cost = CostModel(pla_cost_ratio=float(sect["pla_cost_ratio"]))
    registered = float(sect["registered_angle_deg"])
    grid_step = float(sect["grid_step_deg"])
    digest = _config_digest(cp, args.seed, args.trials)

    rows = []
    for si, snr in enumerate(snrs):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((args.seed, si))))
        stats = complexity_sweep(gammas, snr, mix, cost, args.trials, rng, registered, grid_step_deg=grid_step)
        for s in stats:
            rows.append([s.gamma_deg, s.snr_db, s.rho, s.frr, s.far, s.trials, args.seed])
    _write_rows(args.out, ["gamma_deg", "snr_db", "rho", "frr", "far", "trials", "seed"], rows, _comment(args.seed, digest))
    print(f"auth_sweep: wrote {len(rows)} rows to {args.out}")

    if args.check:
        _check_auth(args, mix, cost, registered, grid_step)
    return EXIT_OK


def _check_auth(args, mix, cost, registered, grid_step):
    """Oracle equivalence at high SNR plus the two degenerate limits."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((args.seed, 7001))))
    trials = max(args.trials, 20000)
    stats = complexity_sweep([0.0, 1.0, 3.0, 6.0, 12.0, 200.0], 60.0, mix, cost, trials, rng, registered, grid_step_deg=grid_step)
    failures = []
    for s in stats:
        if s.gamma_deg == 0.0:
            ok = abs(s.rho - cost.pla_cost_ratio) <= 0.0005
            tag = f"rho(gamma=0)={s.rho:.6f} target {cost.pla_cost_ratio}"
        elif s.gamma_deg == 200.0:
            ok = abs(s.rho - (cost.pla_cost_ratio + 1.0)) <= 0.0005
            tag = f"rho(gamma=200)={s.rho:.6f} target {cost.pla_cost_ratio + 1.0}"
        else:
            oracle = perfect_estimation_rho(s.gamma_deg, mix, cost)
            ok = abs(s.rho - oracle) <= 0.01
            tag = f"rho(gamma={s.gamma_deg:g})={s.rho:.4f} oracle={oracle:.4f}"
        print(f"check {'PASS' if ok else 'FAIL'}: {tag}")
        if not ok:
            failures.append(tag)
    if failures:
        raise CheckFailure("; ".join(failures))


def _cmd_keygen_sweep(args, cp) -> int:
    sect = cp["keygen"]
    lo, hi, step = float(sect["snr_min_db"]), float(sect["snr_max_db"]), float(sect["snr_step_db"])
    if step <= 0 or hi < lo:
        raise ConfigError("keygen SNR grid is empty")
    snrs = [lo + i * step for i in range(int(round((hi - lo) / step)) + 1)]
    key_lens = _ints(sect["key_lens"])
    raw_bits = int(sect["raw_bits"])
    geometry = KeygenGeometry(
        cluster_center_deg=float(sect["cluster_center_deg"]),
        cluster_jitter_std_deg=float(sect["cluster_jitter_std_deg"]),
        weak_path_angle_deg=float(sect["weak_path_angle_deg"]),
        weak_path_gain_db=float(sect["weak_path_gain_db"]),
        grid_step_deg=float(sect["grid_step_deg"]),
    )
    digest = _config_digest(cp, args.seed, args.trials)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    try:
        points = agreement_sweep(snrs, key_lens, args.trials, rng, geometry, raw_bits)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    rows = [[p.snr_db, p.key_len, p.p_alice_bob, p.p_eve_bob, p.trials, args.seed] for p in points]
    _write_rows(
        args.out, ["snr_db", "key_len", "p_alice_bob", "p_eve_bob", "trials", "seed"], rows, _comment(args.seed, digest)
    )
    print(f"keygen_sweep: wrote {len(rows)} rows to {args.out}")

    if args.check:
        _check_keygen(points, key_lens, snrs)
    return EXIT_OK


def _check_keygen(points, key_lens, snrs):
    """Floors, saturation, adversary separation and the threshold ordering."""
    failures = []

    def report(ok, tag):
        print(f"check {'PASS' if ok else 'FAIL'}: {tag}")
        if not ok:
            failures.append(tag)

    if -20.0 not in snrs or 80.0 not in snrs:
        raise ConfigError("--check needs the SNR grid to cover -20 and 80 dB")
    by = {(p.snr_db, p.key_len): p for p in points}
    for k in key_lens:
        floor_tol = 0.02 if k <= 3 else 0.01
        p = by[(-20.0, k)]
        report(abs(p.p_alice_bob - 2.0**-k) <= floor_tol, f"floor k={k}: {p.p_alice_bob:.4f} vs {2.0**-k:.4f}")
        p = by[(80.0, k)]
        report(p.p_alice_bob >= 0.99, f"saturation k={k}: {p.p_alice_bob:.4f}")
        report(
            p.p_eve_bob <= 0.55 and p.p_alice_bob - p.p_eve_bob >= 0.3,
            f"eve separation k={k}: eve={p.p_eve_bob:.4f} gap={p.p_alice_bob - p.p_eve_bob:.4f}",
        )
    if set(key_lens) >= {3, 6}:
        t3 = agreement_threshold(points, 3)
        t6 = agreement_threshold(points, 6)
        report(t6 > t3, f"0.5-threshold ordering: k=6 at {t6:.2f} dB vs k=3 at {t3:.2f} dB")
    if failures:
        raise CheckFailure("; ".join(failures))


def _scenario_from_config(cp):
    sect = cp["scenario"]
    cfg = intersection_config(
        duration_s=float(sect["duration_s"]),
        step_s=float(sect["step_s"]),
        snr_db=float(sect["snr_db"]),
    )
    attacks = _parse_attacks(sect["attacks"])
    pol = cp["policy"]
    policy = PolicyConfig(
        adapt_enabled=pol.getboolean("adapt"),
        initial_gamma_deg=float(pol["initial_gamma_deg"]),
        trust_decay=float(pol["trust_decay"]),
        penalty_gain=float(pol["penalty_gain"]),
        trust_threshold=float(pol["trust_threshold"]),
    )
    return cfg, attacks, policy


def _cmd_anomaly_run(args, cp) -> int:
    cfg, attacks, policy = _scenario_from_config(cp)
    digest = _config_digest(cp, args.seed, args.trials)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    trace = generate_trace(cfg, rng)
    for spec in attacks:
        trace = inject_attack(trace, spec, rng)
    engine = AnomalyEngine(cfg.roadmap, cfg.sensor_position, policy.detector)
    rows = []
    flag_steps = 0
    detected = {i: False for i in range(len(attacks))}
    for step in trace.steps:
        flags = engine.observe_step(step.measurements, step.reports)
        flag_steps += int(bool(flags))
        for f in flags:
            rows.append([f.timestamp, f.source_id, f.detector, f.severity, f.explanation.replace(",", ";")])
            for i, spec in enumerate(attacks):
                if spec.start_s <= f.timestamp < spec.end_s:
                    detected[i] = True
    _write_rows(args.out, ["timestamp", "source_id", "detector", "severity", "explanation"], rows, _comment(args.seed, digest))
    rate = flag_steps / len(trace.steps)
    print(f"anomaly_run: {len(rows)} flags, flag-step rate {rate:.3f}")
    for i, spec in enumerate(attacks):
        print(f"attack {spec.kind.value} [{spec.start_s},{spec.end_s}): detected={detected[i]}")

    if args.check:
        failures = []
        if not attacks:
            ok = rate < 0.05
            print(f"check {'PASS' if ok else 'FAIL'}: benign flag-step rate {rate:.3f} < 0.05")
            if not ok:
                failures.append("benign flag rate")
        for i, spec in enumerate(attacks):
            ok = detected[i]
            print(f"check {'PASS' if ok else 'FAIL'}: {spec.kind.value} detected")
            if not ok:
                failures.append(spec.kind.value)
        if failures:
            raise CheckFailure("; ".join(failures))
    return EXIT_OK


def _cmd_e2e(args, cp) -> int:
    cfg, attacks, policy = _scenario_from_config(cp)
    digest = _config_digest(cp, args.seed, args.trials)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    log = run_e2e(cfg, attacks, policy, rng, seed_note=args.seed)
    log.header["config_sha256"] = digest
    log.header["version"] = __version__
    try:
        with open(args.out, "w") as fh:
            fh.write(log.to_jsonl())
    except OSError as e:
        raise OSError(f"cannot write {args.out}: {e}") from e

    flag_rows = [
        [e["t"], e["node"], e["detector"], e["severity"], e["explanation"].replace(",", ";")]
        for e in log.events
        if e["kind"] == "flag"
    ]
    action_rows = [
        [e["t"], e["target"], e["action"], e["magnitude"], e["risks"]] for e in log.events if e["kind"] == "action"
    ]
    comment = _comment(args.seed, digest)
    _write_rows(args.out + ".flags.csv", ["timestamp", "source_id", "detector", "severity", "explanation"], flag_rows, comment)
    _write_rows(args.out + ".actions.csv", ["timestamp", "target", "kind", "magnitude", "triggering_risks"], action_rows, comment)

    s = log.summary
    print(
        f"e2e: steps={s['steps']} flags={s['total_flags']} actions={s['total_actions']} "
        f"illegit_acceptance={s['illegitimate_acceptance_rate']:.3f} digest={event_log_digest(log)[:12]}"
    )

    if args.check:
        failures = []
        if not attacks:
            ok = s["total_actions"] == 0
            print(f"check {'PASS' if ok else 'FAIL'}: benign run emits zero actions ({s['total_actions']})")
            if not ok:
                failures.append("benign actions")
        else:
            rng_off = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
            log_off = run_e2e(cfg, attacks, dataclasses.replace(policy, adapt_enabled=False), rng_off)
            pre = log_off.summary["illegitimate_acceptance_rate"]
            post = s["illegitimate_acceptance_rate"]
            ok = post < pre or (pre == 0.0 and post == 0.0)
            print(f"check {'PASS' if ok else 'FAIL'}: adaptation lowers illegitimate acceptance ({post:.3f} vs {pre:.3f})")
            if not ok:
                failures.append("closed loop")
        if failures:
            raise CheckFailure("; ".join(failures))
    return EXIT_OK


COMMANDS = {
    "auth_sweep": (_cmd_auth_sweep, 10000, "auth.csv"),
    "keygen_sweep": (_cmd_keygen_sweep, 10000, "keygen.csv"),
    "anomaly_run": (_cmd_anomaly_run, 1, "flags.csv"),
    "e2e": (_cmd_e2e, 1, "events.jsonl"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isacguard", description="ISAC security experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, trials, out) in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, required=True, help="explicit 64-bit seed")
        p.add_argument("--trials", type=int, default=trials)
        p.add_argument("--out", default=out)
        p.add_argument("--check", action="store_true", help="run built-in acceptance assertions")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        if args.trials < 1:
            raise ConfigError("trials must be >= 1")
        cp = _load_config(args.config)
        handler = COMMANDS[args.command][0]
        return handler(args, cp)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except CheckFailure as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
