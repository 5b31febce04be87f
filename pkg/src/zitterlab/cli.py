"""Command-line runner: ``zitterlab run <config> [--check] [--out DIR]``.

Config files are flat UTF-8 ``key = value`` documents; ``#`` starts a comment.
List values are comma separated, complex values use Python literals (``1+0.5j``).
Exit codes: 0 pass, 1 check failure, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ConfigError, MissingRequired, OutOfRange, UnknownField, UnknownScenario, ZitterlabError
from .scenarios import SCENARIOS, ScenarioConfig, run_scenario


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_positive(raw: str) -> float:
    value = float(raw)
    if not value > 0:
        raise ValueError("must be > 0")
    return value


def _parse_positive_int(raw: str) -> int:
    value = int(raw)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _parse_int(raw: str) -> int:
    return int(raw)


def _parse_complex(raw: str) -> complex:
    return complex(raw.replace(" ", ""))


def _parse_complex_list(raw: str) -> tuple:
    return tuple(_parse_complex(tok) for tok in raw.split(",") if tok.strip())


def _parse_positive_list(raw: str) -> tuple:
    values = tuple(float(tok) for tok in raw.split(",") if tok.strip())
    if not values or any(v <= 0 for v in values):
        raise ValueError("must be a comma list of positive numbers")
    return values


def _parse_int_list(raw: str) -> tuple:
    values = tuple(int(tok) for tok in raw.split(",") if tok.strip())
    if not values or any(v <= 0 for v in values):
        raise ValueError("must be a comma list of positive integers")
    return values


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("must be true/false")


def _parse_choice(options):
    def parse(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return raw

    return parse


FIELD_PARSERS = {
    "scenario": _parse_choice(SCENARIOS),
    "hbar": _parse_positive,
    "mass": _parse_positive,
    "epsilon": _parse_positive,
    "epsilon_mode": _parse_choice(("fixed", "de_broglie", "compton")),
    "light_speed": _parse_positive,
    "epsilon_floor": _parse_positive,
    "permutation": _parse_choice(("s_plus", "s_minus")),
    "velocity": _parse_choice(("zero", "constant", "circular", "polynomial")),
    "velocity_x": _parse_complex,
    "velocity_y": _parse_complex,
    "velocity_coeffs_x": _parse_complex_list,
    "velocity_coeffs_y": _parse_complex_list,
    "circular_omega": _parse_float,
    "circular_amplitude": _parse_float,
    "z0_x": _parse_complex,
    "z0_y": _parse_complex,
    "cycles": _parse_positive_int,
    "epsilons": _parse_positive_list,
    "T": _parse_positive,
    "dt": _parse_positive,
    "n_grid": _parse_positive_int,
    "box_half_width": _parse_positive,
    "sigma0": _parse_positive,
    "center_x": _parse_float,
    "center_y": _parse_float,
    "k0_x": _parse_float,
    "k0_y": _parse_float,
    "omega": _parse_positive,
    "frame_stride": _parse_positive_int,
    "seed_x": _parse_float,
    "seed_y": _parse_float,
    "ensemble_n": _parse_positive_int,
    "seed": _parse_int,
    "bins": _parse_positive_int,
    "rho_floor": _parse_positive,
    "hj_rho_floor": _parse_positive,
    "hj_time": _parse_positive,
    "hj_dts": _parse_positive_list,
    "hj_ns": _parse_int_list,
    "guided_epsilons": _parse_positive_list,
    "write_frames": _parse_bool,
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a key-value config document.

    Raises UnknownField / UnknownScenario / OutOfRange / MissingRequired with
    line-numbered diagnostics.
    """
    values: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise OutOfRange(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in FIELD_PARSERS:
            raise UnknownField(f"line {lineno}: unknown key '{key}'")
        if key in values:
            raise OutOfRange(f"line {lineno}: duplicate key '{key}'")
        try:
            values[key] = FIELD_PARSERS[key](raw_value)
        except ValueError as exc:
            if key == "scenario":
                raise UnknownScenario(f"line {lineno}: scenario '{raw_value}' is not supported") from None
            raise OutOfRange(f"line {lineno}: bad value for '{key}': {exc}") from None
    if "scenario" not in values:
        raise MissingRequired("config is missing the required key 'scenario'")
    return ScenarioConfig(provided=frozenset(values), **values)


def parse_config_file(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="zitterlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one scenario from a config file")
    run_p.add_argument("config", help="path to the key-value config document")
    run_p.add_argument("--check", action="store_true", help="fail (exit 1) if any scenario check fails")
    run_p.add_argument("--out", default="out", help="output directory (default: ./out)")
    sub.add_parser("list-scenarios", help="print the scenario catalog")
    sub.add_parser("version", help="print the package version")
    args = parser.parse_args(argv)

    if args.command == "version":
        print(__version__)
        return 0
    if args.command == "list-scenarios":
        for name in SCENARIOS:
            print(name)
        return 0

    try:
        cfg = parse_config_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_scenario(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ZitterlabError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for path in result.files:
        print(f"wrote {path}")
    for name, ok, detail in result.checks:
        print(f"{'PASS' if ok else 'FAIL'} {result.scenario}:{name} ({detail})")
    if args.check and not result.passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
