"""Run configuration: strict schema, YAML/JSON loading and dotted overrides.

A config file is YAML (JSON is accepted as the YAML subset it is) with the
sections below; every key is optional and unknown keys are rejected.  The
metadata sidecar written next to every output can be loaded as a config: its
``config`` block is the fully resolved configuration of that run.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import SlabradError


class ConfigError(SlabradError):
    """Config file or flag failed schema validation."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SlabConfig(_Section):
    index: float = Field(3.5, gt=1.0, description="core refractive index")
    width_nm: float = Field(200.0, gt=0.0, description="slab thickness W [nm]")


class DipoleConfig(_Section):
    orientation: Literal["x", "y", "z"] = "y"


class LatticeConfig(_Section):
    kind: Literal["chain", "square", "hexagonal"] = "chain"
    sites: int = Field(5, ge=1, description="chain length or square site count (ignored for hexagonal)")
    d_over_lambda: float = Field(0.54, gt=0.0, description="spacing for fixed-geometry runs")


class SweepConfig(_Section):
    d_min: float = Field(0.05, gt=0.0, description="first d/lambda of the grid")
    d_max: float = Field(10.0, gt=0.0, description="last d/lambda of the grid")
    d_points: int = Field(400, ge=0)
    phi_points: int = Field(360, ge=0, description="uniform grid on [0, 2*pi)")
    phi_fixed_over_pi: float = Field(0.22, ge=0.0, lt=2.0, description="angle of size sweeps")
    n_list: list[int] = Field(default_factory=lambda: list(range(2, 26)))
    quantity: Literal["directional", "total"] = "directional"


class ModesConfig(_Section):
    width_min_nm: float = Field(10.0, gt=0.0)
    width_max_nm: float = Field(1000.0, gt=0.0)
    points: int = Field(200, ge=0)


class DisorderConfig(_Section):
    sigma_over_d: list[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.5])
    realizations: int = Field(500, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)


class ScalingConfig(_Section):
    alpha: float = Field(0.5, gt=0.0)
    dimensionality: Literal["1D", "2D"] = "1D"
    n_list: list[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128, 256, 512, 1024])


class OracleConfig(_Section):
    n: int | None = Field(None, ge=1, le=6, description="emitters per case; unset draws from {2, 3, 4}")
    cases: int = Field(4, ge=1)
    phi_points: int = Field(8, ge=0, description="random angles per case")
    seed: int = Field(0, ge=0, lt=2**64)
    tolerance: float = Field(1e-4, gt=0.0)


class QuadratureSection(_Section):
    detour_height: float = Field(0.05, gt=0.0)
    k_max_over_k0: float = Field(20.0, gt=0.0)
    rel_tol: float = Field(1e-8, gt=0.0)


class OutputConfig(_Section):
    path: str = "slabrad_out.csv"
    format: Literal["csv", "json"] = "csv"


class RunConfig(_Section):
    environment: Literal["homogeneous", "slab"] = "slab"
    slab: SlabConfig = SlabConfig()
    wavelength_nm: float = Field(980.0, gt=0.0)
    dipole: DipoleConfig = DipoleConfig()
    lattice: LatticeConfig = LatticeConfig()
    sweep: SweepConfig = SweepConfig()
    modes: ModesConfig = ModesConfig()
    disorder: DisorderConfig = DisorderConfig()
    scaling: ScalingConfig = ScalingConfig()
    oracle: OracleConfig = OracleConfig()
    quadrature: QuadratureSection = QuadratureSection()
    output: OutputConfig = OutputConfig()


def leaf_keys(model: type[BaseModel] = RunConfig, prefix: str = "") -> list[tuple[str, Any]]:
    """Dotted paths of every scalar/list setting with its field info."""
    out = []
    for name, info in model.model_fields.items():
        ann = info.annotation
        if isinstance(ann, type) and issubclass(ann, BaseModel):
            out.extend(leaf_keys(ann, f"{prefix}{name}."))
        else:
            out.append((f"{prefix}{name}", info))
    return out


def _node_lines(node, path=()) -> dict[tuple, int]:
    """Map key paths of a composed YAML tree to 1-based line numbers."""
    lines = {path: node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = path + (k.value,)
            lines[sub] = k.start_mark.line + 1
            for p, ln in _node_lines(v, sub).items():
                lines.setdefault(p, ln)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            lines.update(_node_lines(v, path + (i,)))
    return lines


def _set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    cur = data
    for p in parts[:-1]:
        nxt = cur.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"{'.'.join(parts[:-1])}: expected a mapping")
        cur = nxt
    cur[parts[-1]] = value


def _format_errors(err: ValidationError, lines: dict[tuple, int], source: str, overrides: dict) -> str:
    msgs = []
    for e in err.errors():
        loc = tuple(e["loc"])
        key = ".".join(str(p) for p in loc)
        if key in overrides:
            where = f"flag --{key.replace('_', '-')}"
        else:
            ln = next((lines[loc[:i]] for i in range(len(loc), 0, -1) if loc[:i] in lines), None)
            where = f"{source}:{ln}" if ln else source
        msgs.append(f"{where}: {key}: {e['msg']}")
    return "invalid configuration\n  " + "\n  ".join(msgs)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read ``path`` (YAML, JSON or a metadata sidecar), apply dotted overrides, validate."""
    overrides = overrides or {}
    data: dict = {}
    lines: dict[tuple, int] = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        lines = _node_lines(node) if node is not None else {}
        if "config" in loaded and "tool_version" in loaded:
            loaded = loaded["config"]
            lines = {p[1:]: ln for p, ln in lines.items() if p[:1] == ("config",)}
        data = loaded
    for key, value in overrides.items():
        _set_dotted(data, key, value)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err, lines, source, overrides)) from None
