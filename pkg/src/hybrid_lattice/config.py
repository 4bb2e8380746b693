"""Run configuration: parsing, preset expansion, validation and resolution.

A configuration is a small nested map ``{"general": {...}, "left": {...},
"right": {...}}``. Text files use ``key = value`` lines with ``#`` comments;
keys before any section header belong to ``[general]``, and the JC keys
``omega``, ``omega0``, ``g`` may appear there as shorthand for ``[left]``.
Times (``tau``, ``t_final``) are in units of ``1/|v|`` where ``v`` is the
left-section TLS coupling (absolute units when ``v = 0``).

``resolve`` returns a complete map in which every value consumed by the
engine is explicit; resolving a resolved map returns it unchanged, which is
what makes manifests re-runnable.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .lattice import (
    INITIAL_KINDS,
    PRESET_NAMES,
    ChainParams,
    LatticeSpec,
    build_chain,
    default_stride,
    initial_state,
    preset_params,
)
from .mps import TruncationPolicy
from .polariton import REGIMES, JCParams
from .tebd import OBSERVABLES, SimulationConfig, energy_per_excitation


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(kind):
    def parse(text):
        if text is None or str(text).strip().lower() in ("none", ""):
            return None
        return kind(text)
    return parse


def _int(text):
    if isinstance(text, float) and not text.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(text)


def _frame(text):
    if str(text).strip().lower() == "auto":
        return "auto"
    return float(text)


def _observables(text):
    if isinstance(text, (list, tuple)):
        items = [str(x).strip() for x in text]
    else:
        items = [x.strip() for x in str(text).split(",") if x.strip()]
    for name in items:
        if name not in OBSERVABLES:
            raise ValueError(f"unknown observable {name!r}; expected a subset of {OBSERVABLES}")
    return [name for name in OBSERVABLES if name in items]


GENERAL_KEYS = {
    "scenario": str,
    "label": str,
    "regime": _optional(str),
    "L": _int,
    "n_max": _int,
    "activation": _bool,
    "v": float,
    "omega_A": _optional(float),
    "lambda": _optional(float),
    "boundary": _optional(_int),
    "lambda_C": _optional(float),
    "tau": float,
    "t_final": float,
    "measure_stride": _int,
    "chi_max": _int,
    "epsilon0": float,
    "initial_state": str,
    "observables": _observables,
    "frame_frequency": _frame,
}
SECTION_KEYS = {
    "left": {"omega": float, "omega0": float, "g": float},
    "right": {"omega": float, "omega0": float, "g": float, "v": float},
}
SECTIONS = ("general", "left", "right")


def empty():
    return {name: {} for name in SECTIONS}


def _coerce(section, key, value):
    table = GENERAL_KEYS if section == "general" else SECTION_KEYS[section]
    if key not in table:
        raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
    try:
        return table[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key!r} in [{section}]: {exc}", key=key) from None


def parse_text(text: str) -> dict:
    """Parse the ``key = value`` format into a (coerced, unresolved) map."""
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None, default_section="__defaults__",
    )
    parser.optionxform = str
    try:
        parser.read_string("[general]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    out = empty()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, value in parser.items(section, raw=True):
            if section == "general" and key in SECTION_KEYS["left"]:
                out["left"][key] = _coerce("left", key, value)
            else:
                out[section][key] = _coerce(section, key, value)
    return out


def from_mapping(data: dict) -> dict:
    """Validate a JSON-style nested map (e.g. a manifest's ``config``)."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    out = empty()
    for section, items in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        if not isinstance(items, dict):
            raise ConfigError(f"section [{section}] must be a mapping", key=section)
        for key, value in items.items():
            out[section][key] = _coerce(section, key, value)
    return out


def load(path) -> dict:
    """Read a config file; JSON manifests are accepted and their ``config`` entry used."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config {path}: {exc}") from None
        return from_mapping(data.get("config", data))
    return parse_text(text)


def merge(base: dict, overlay: dict) -> dict:
    out = empty()
    for section in SECTIONS:
        out[section].update(base.get(section, {}))
        out[section].update(overlay.get(section, {}))
    return out


def preset_map(name: str) -> dict:
    """A preset as a complete explicit config map."""
    chain, d = preset_params(name)
    v = chain.v_left
    cfg = empty()
    g = cfg["general"]
    g.update(
        scenario=name, label=chain.label, regime=d.regime, L=chain.L, n_max=chain.n_max,
        activation=chain.activation, v=v, omega_A=chain.omega_A, **{"lambda": chain.lam},
        boundary=chain.boundary, lambda_C=chain.lambda_C,
        tau=d.tau * abs(v), t_final=d.t_final * abs(v), measure_stride=d.measure_stride,
        chi_max=d.chi_max, epsilon0=d.epsilon0, initial_state=d.initial_state,
    )
    cfg["left"].update(omega=chain.left.omega, omega0=chain.left.omega0, g=chain.left.g)
    if chain.right is not None:
        r = chain.right
        cfg["right"].update(omega=r.omega, omega0=r.omega0, g=r.g, v=chain.v_right)
    return cfg


def _require(cfg, section, key):
    value = cfg[section].get(key)
    if value is None:
        where = "" if section == "general" else f" in [{section}]"
        raise ConfigError(f"missing required key {key!r}{where}", key=key)
    return value


@dataclass(frozen=True)
class ResolvedRun:
    config: dict
    chain: ChainParams
    lattice: LatticeSpec
    sim: SimulationConfig
    time_unit: float
    initial_state: str


def resolve(cfg: dict) -> ResolvedRun:
    """Expand a preset (if named), fill defaults and validate everything.

    Raises ConfigError naming the offending key; nothing is run or written.
    """
    name = cfg["general"].get("scenario")
    if name is not None:
        if name not in PRESET_NAMES:
            raise ConfigError(f"unknown scenario {name!r}; expected one of {PRESET_NAMES}", key="scenario")
        cfg = merge(preset_map(name), cfg)
    else:
        cfg = merge(empty(), cfg)
    gen = cfg["general"]

    L = _require(cfg, "general", "L")
    v = _require(cfg, "general", "v")
    left = _jc(cfg, "left")
    gen.setdefault("label", "custom")
    gen.setdefault("n_max", 2)
    gen.setdefault("activation", True)
    gen.setdefault("regime", None)
    gen.setdefault("boundary", None)
    regime = gen["regime"]
    if regime is not None and regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}; expected one of {REGIMES}", key="regime")

    if gen["activation"]:
        if regime is not None and (gen.get("omega_A") is None or gen.get("lambda") is None):
            from .polariton import matching_conditions
            try:
                m = matching_conditions(left, v, regime)
            except InvalidArgumentError as exc:
                raise ConfigError(str(exc), key="regime") from None
            if gen.get("omega_A") is None:
                gen["omega_A"] = m.omega_A
            if gen.get("lambda") is None:
                gen["lambda"] = m.lam
        _require(cfg, "general", "omega_A")
        _require(cfg, "general", "lambda")
    else:
        gen["omega_A"] = None
        gen["lambda"] = None

    right = None
    if gen["boundary"] is not None:
        right = _jc(cfg, "right")
        _require(cfg, "right", "v")
        _require(cfg, "general", "lambda_C")
    else:
        if cfg["right"]:
            key = next(iter(cfg["right"]))
            raise ConfigError("a [right] section needs 'boundary'", key=key)
        gen["lambda_C"] = None

    chain = ChainParams(
        L=L, left=left, v_left=v, n_max=gen["n_max"], activation=gen["activation"],
        omega_A=gen["omega_A"], lam=gen["lambda"], boundary=gen["boundary"], right=right,
        v_right=cfg["right"].get("v"), lambda_C=gen["lambda_C"], label=gen["label"],
    )
    try:
        lattice = build_chain(chain)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key=_key_from_message(str(exc))) from None

    unit = 1.0 / abs(v) if v != 0.0 else 1.0
    t_final = _require(cfg, "general", "t_final")
    gen.setdefault("tau", 1e-3)
    tau = gen["tau"] * unit
    gen.setdefault("measure_stride", default_stride(tau, v) if v != 0.0 else 1)
    gen.setdefault("chi_max", 4)
    gen.setdefault("epsilon0", 1e-6)
    gen.setdefault("initial_state", "activation-excited" if gen["activation"] else "centered-polariton")
    gen.setdefault("observables", list(OBSERVABLES))
    if gen["initial_state"] not in INITIAL_KINDS:
        raise ConfigError(
            f"unknown initial_state {gen['initial_state']!r}; expected one of {INITIAL_KINDS}",
            key="initial_state",
        )
    try:
        vectors = initial_state(lattice, gen["initial_state"])
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key="initial_state") from None
    frame = gen.get("frame_frequency", "auto")
    if frame == "auto":
        frame = energy_per_excitation(lattice, vectors)
    gen["frame_frequency"] = float(frame)

    try:
        policy = TruncationPolicy(gen["chi_max"], gen["epsilon0"])
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key=_key_from_message(str(exc), "chi_max")) from None
    try:
        sim = SimulationConfig(
            tau, t_final * unit, gen["measure_stride"], policy,
            tuple(gen["observables"]), frame_frequency=gen["frame_frequency"],
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key=_key_from_message(str(exc))) from None
    return ResolvedRun(cfg, chain, lattice, sim, unit, gen["initial_state"])


def _jc(cfg, section):
    values = [_require(cfg, section, k) for k in ("omega", "omega0", "g")]
    try:
        return JCParams(*values)
    except InvalidArgumentError as exc:
        raise ConfigError(f"[{section}] {exc}", key=_key_from_message(str(exc), "g")) from None


_KEY_HINTS = (
    ("measure_stride", "measure_stride"), ("stride", "measure_stride"), ("t_final", "t_final"),
    ("tau", "tau"), ("chi_max", "chi_max"), ("epsilon0", "epsilon0"), ("boundary", "boundary"),
    ("n_max", "n_max"), ("observable", "observables"), ("omega_A", "omega_A"),
    ("lambda_C", "lambda_C"), ("lambda", "lambda"), ("L must", "L"), ("omega0", "omega0"),
    ("omega", "omega"), ("g ", "g"),
)


def _key_from_message(message, fallback=None):
    for needle, key in _KEY_HINTS:
        if needle in message:
            return key
    return fallback


def apply_overrides(cfg: dict, **values) -> dict:
    """Overlay command-line values (None means not given)."""
    out = merge(cfg, {})
    for key, value in values.items():
        if value is not None:
            out["general"][key] = _coerce("general", key, value)
    return out


def to_json_ready(cfg: dict) -> dict:
    """Drop empty sections; values are already JSON-native."""
    return {s: dict(cfg[s]) for s in SECTIONS if cfg[s]}


def derived_values(run: ResolvedRun) -> dict:
    """Quantities implied by the resolved parameters (recorded in manifests)."""
    from .polariton import coefficients, matching_conditions, suppression_ratio, swap_interface

    chain = run.chain
    out = {
        "time_unit": run.time_unit,
        "tau_abs": run.sim.tau,
        "t_final_abs": run.sim.t_final,
        "n_steps": run.sim.n_steps,
        "rho_1_minus_left": coefficients(chain.left, 1).rho_minus,
        "suppression_ratio_left": suppression_ratio(chain.left, chain.v_left),
    }
    regime = run.config["general"].get("regime")
    if regime is not None:
        m = matching_conditions(chain.left, chain.v_left, regime)
        out["matching_omega_A"] = m.omega_A
        out["matching_lambda"] = m.lam
    if chain.boundary is not None:
        swap = swap_interface(chain.left, chain.v_left)
        out["v_r"] = chain.v_right
        out["matching_lambda_C"] = swap.lambda_C
        out["matching_v_r"] = swap.v_r
        out["suppression_ratio_right"] = suppression_ratio(chain.right, chain.v_right)
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}
