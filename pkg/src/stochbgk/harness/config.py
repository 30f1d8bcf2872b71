"""Flat ``key = value`` experiment configuration with dotted section keys.

Example::

    grid.nx = 512
    grid.xi_min = -0.5
    flux.name = burgers
    noise.name = nula
    noise.sigma = 0.1
    solver.eps = 1dt          # multiples of dt are written with a dt suffix
    experiment.axis = eps
    experiment.ladder = 8dt, 4dt, 2dt, 1dt

Unknown keys are errors.  Model parameters are checked against the model
factory signatures.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..models import FLUXES, INITIAL, NOISES
from ..solver import SolverConfig

REPORT_VERSION = 1

_GRID_KEYS = {"nx": "nx", "nxi": "nxi", "xi_min": "xi_min", "xi_max": "xi_max"}
_SOLVER_KEYS = {"eps", "dt", "t_end", "seed", "scheme", "kappa", "interpolation", "splitting",
                "output_every", "check_support"}
_EXPERIMENT_KEYS = {"axis", "ladder", "replicas", "target", "out", "fv_factor", "slack",
                    "levels", "tol", "max_iter", "test_function", "samples"}
AXES = ("eps", "dt", "grid")
TARGETS = ("exact_riemann", "fv_reference", "self_refinement", "picard_oracle")


class ConfigError(ValueError):
    pass


def parse_scalar(text: str):
    """int, float, bool or bare string."""
    s = text.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def resolve_dt_multiple(value, dt: float) -> float:
    """Accept a number or a string such as ``4dt`` / ``0.5dt``."""
    if isinstance(value, str):
        s = value.strip()
        if s.endswith("dt"):
            head = s[:-2].strip().rstrip("*").strip()
            return (float(head) if head else 1.0) * dt
        raise ConfigError(f"cannot read {value!r} as a number or a multiple of dt")
    return float(value)


def read_config_text(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"{source}:{lineno}: keys must be dotted (section.name), got {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _factory_params(catalog: dict, name: str, section: str) -> set[str]:
    if name not in catalog:
        raise ConfigError(f"unknown {section} model {name!r}; choose from {sorted(catalog)}")
    return set(inspect.signature(catalog[name]).parameters) - {"noise_class"}


@dataclass
class ExperimentSpec:
    base: SolverConfig
    axis: str = "eps"
    ladder: list = field(default_factory=list)   # raw entries; may be 'k dt' strings
    replicas: int = 1
    target: str = "exact_riemann"
    out_dir: str = "results"
    report_version: int = REPORT_VERSION
    fv_factor: int = 4
    slack: float = 0.10
    levels: int = 3
    tol: float = 1e-8
    max_iter: int = 500
    test_function: str = "shock"
    samples: int = 1000

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"experiment.axis must be one of {AXES}, got {self.axis!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"experiment.target must be one of {TARGETS}, got {self.target!r}")
        if self.replicas < 1:
            raise ConfigError("experiment.replicas must be >= 1")
        values = self.ladder_values()
        if len(values) > 1:
            diffs = [b - a for a, b in zip(values, values[1:])]
            if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
                raise ConfigError(f"ladder must be strictly monotone, got {values}")

    def ladder_values(self) -> list[float]:
        return [resolve_dt_multiple(v, self.base.dt) for v in self.ladder]

    def echo(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "base"}
        d["ladder"] = [str(v) for v in self.ladder]
        d["base"] = self.base.to_dict()
        return d


def build_spec(entries: dict[str, str], defaults: ExperimentSpec | None = None) -> ExperimentSpec:
    """Overlay parsed config entries onto ``defaults``."""
    spec = defaults or ExperimentSpec(SolverConfig())
    base = spec.base
    solver_kw: dict = {}
    exp_kw: dict = {}
    model = {"flux": (base.flux, dict(base.flux_params)),
             "noise": (base.noise, dict(base.noise_params)),
             "initial": (base.initial, dict(base.initial_params))}
    model_params: dict[str, dict] = {"flux": {}, "noise": {}, "initial": {}}
    names_given = set()
    for key, raw in entries.items():
        section, name = key.split(".", 1)
        value = parse_scalar(raw)
        if section == "grid":
            if name not in _GRID_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            solver_kw[_GRID_KEYS[name]] = value
        elif section == "solver":
            if name not in _SOLVER_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            solver_kw[name] = value
        elif section in model:
            if name == "name":
                names_given.add(section)
                model[section] = (str(value), {})
            else:
                model_params[section][name] = value
        elif section == "experiment":
            if name not in _EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            if name == "ladder":
                value = [parse_scalar(v) for v in raw.split(",") if v.strip()]
            exp_kw["out_dir" if name == "out" else name] = value
        else:
            raise ConfigError(f"unknown section in key {key!r}")

    catalogs = {"flux": FLUXES, "noise": NOISES, "initial": INITIAL}
    for section in model:
        mname, params = model[section]
        params.update(model_params[section])
        allowed = _factory_params(catalogs[section], mname, section)
        bad = set(params) - allowed
        if bad:
            raise ConfigError(f"unknown {section} parameter(s) {sorted(bad)} for model {mname!r}")
        model[section] = (mname, params)

    # eps may be written as a multiple of dt
    dt = float(solver_kw.get("dt", base.dt))
    if "eps" in solver_kw:
        solver_kw["eps"] = resolve_dt_multiple(solver_kw["eps"], dt)
    for k in ("dt", "t_end", "kappa", "xi_min", "xi_max"):
        if k in solver_kw:
            solver_kw[k] = float(solver_kw[k])
    try:
        new_base = replace(base, flux=model["flux"][0], flux_params=model["flux"][1],
                           noise=model["noise"][0], noise_params=model["noise"][1],
                           initial=model["initial"][0], initial_params=model["initial"][1],
                           **solver_kw)
        return replace(spec, base=new_base, **exp_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path: str | Path, defaults: ExperimentSpec | None = None) -> ExperimentSpec:
    p = Path(path)
    return build_spec(read_config_text(p.read_text(), str(p)), defaults)
