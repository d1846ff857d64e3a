"""Flat structured-text configuration: one `section.key = value` per line,
values in JSON (complex entries as [re, im] pairs).  Parses into nested
dicts and builds SystemSpec / ExperimentPlan objects from them.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .ensemble import ExperimentPlan
from .system import NoiseParams, SystemSpec, build_flat_bath


class ConfigError(ValueError):
    """Malformed configuration; message carries line/field diagnostics."""


def parse_config_text(text: str) -> dict:
    """Parse `section.key = value` lines into {section: {key: value}}.

    Blank lines and `#` comments are skipped; values are JSON, so strings
    are quoted, booleans are true/false, and matrices are nested arrays.
    """
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key_part, _, value_part = line.partition("=")
        key_part = key_part.strip()
        if key_part.count(".") != 1:
            raise ConfigError(
                f"line {lineno}: key {key_part!r} must look like 'section.key'"
            )
        section, key = (p.strip() for p in key_part.split("."))
        if not section or not key:
            raise ConfigError(f"line {lineno}: empty section or key name")
        try:
            value = json.loads(value_part.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"line {lineno}: value for {key_part} is not valid JSON ({exc.msg})"
            ) from exc
        cfg.setdefault(section, {})[key] = value
    return cfg


def load_config(path) -> tuple[dict, str]:
    """Read a config file; returns (parsed dict, sha256 hex of the bytes)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    digest = hashlib.sha256(blob).hexdigest()
    return parse_config_text(blob.decode("utf-8")), digest


def config_hash(cfg: dict) -> str:
    """Hash of a canonical JSON rendering, for headers without a file."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def complex_matrix(value, field: str) -> np.ndarray:
    """JSON nested array with [re, im] leaf pairs -> complex ndarray."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ConfigError(
            f"field {field}: complex entries must be [re, im] pairs"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def _require(section: dict, name: str, field: str):
    if name not in section:
        raise ConfigError(f"field {field}.{name}: missing")
    return section[name]


def system_from_config(cfg: dict) -> SystemSpec:
    """Build the quantum system from the [system] section.

    kind "flat-bath" takes gamma, levels, spacing, e_s; kind "explicit"
    takes energies, v (complex matrix), manifold, initial and an optional
    selection_rule flag.
    """
    section = cfg.get("system")
    if not section:
        raise ConfigError("missing [system] section")
    kind = _require(section, "kind", "system")
    try:
        if kind == "flat-bath":
            return build_flat_bath(
                gamma_target=float(_require(section, "gamma", "system")),
                level_count=int(_require(section, "levels", "system")),
                spacing=float(_require(section, "spacing", "system")),
                e_s=float(section.get("e_s", 0.0)),
            )
        if kind == "explicit":
            return SystemSpec(
                energies=np.asarray(_require(section, "energies", "system"), float),
                v=complex_matrix(_require(section, "v", "system"), "system.v"),
                manifold=tuple(_require(section, "manifold", "system")),
                initial=int(_require(section, "initial", "system")),
                selection_rule=bool(section.get("selection_rule", True)),
            )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field system: {exc}") from exc
    raise ConfigError(f"field system.kind: unknown kind {kind!r}")


def plan_from_config(
    cfg: dict,
    seed_override: int | None = None,
    sigma_override: float | None = None,
    n_traj_override: int | None = None,
) -> ExperimentPlan:
    """Build an ExperimentPlan from [system], [noise] and [run] sections."""
    system = system_from_config(cfg)
    noise_sec = cfg.get("noise", {})
    sigma = float(noise_sec.get("sigma", 0.0))
    if sigma_override is not None:
        sigma = float(sigma_override)
    run = cfg.get("run")
    if not run:
        raise ConfigError("missing [run] section")
    seed = int(_require(run, "master_seed", "run"))
    if seed_override is not None:
        seed = int(seed_override)
    n_traj = int(_require(run, "n_traj", "run"))
    if n_traj_override is not None:
        n_traj = int(n_traj_override)
    observables = run.get("observables", ["survival"])
    if isinstance(observables, str):
        observables = [observables]
    try:
        return ExperimentPlan(
            system=system,
            noise=NoiseParams(sigma=sigma),
            dt=float(_require(run, "dt", "run")),
            horizon=float(_require(run, "horizon", "run")),
            n_traj=n_traj,
            observables=tuple(observables),
            master_seed=seed,
            record_stride=int(run.get("record_stride", 1)),
            allow_coarse_dt=bool(run.get("allow_coarse_dt", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"field run: {exc}") from exc
