import configparser
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.errors import InputError

ENV_PREFIX = "CARLESON_"
TAU_0 = 2.0 ** -4
BOUNDARY_DIM = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SetSpec(_Section):
    """Set definition block: kind plus its parameters."""

    kind: Literal["flat", "graph", "polygon", "four_corners"] = "flat"
    breakpoints: Optional[List[Tuple[float, float]]] = None
    vertices: Optional[List[Tuple[float, float]]] = None
    level: Optional[int] = None

    @model_validator(mode="after")
    def _parameters_present(self):
        need = {"graph": "breakpoints", "polygon": "vertices", "four_corners": "level"}.get(self.kind)
        if need and getattr(self, need) is None:
            raise ValueError(f"set kind '{self.kind}' needs '{need}'")
        return self

    def as_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class WindowSpec(_Section):
    lo: Tuple[float, float] = (-2.0, 0.0)
    hi: Tuple[float, float] = (3.0, 8.0)

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ValueError("window needs lo < hi in both coordinates")
        return self


class GridSpec(_Section):
    """Coarsest generation and, for unbounded curves, the parameter window; the finest generation is the depth."""

    k_min: int = 0
    param_lo: Optional[float] = None
    param_hi: Optional[float] = None

    @model_validator(mode="after")
    def _range(self):
        if (self.param_lo is None) != (self.param_hi is None):
            raise ValueError("param_lo and param_hi come together")
        return self

    @property
    def param_window(self) -> Optional[Tuple[float, float]]:
        return None if self.param_lo is None else (self.param_lo, self.param_hi)


class StructureParams(_Section):
    """Whitney-dyadic structure parameters (eta, K, tau) and the corona settings."""

    eta: float = 2.0 ** -8
    K: float = 2.0 ** 14
    tau: float = 2.0 ** -6
    mode: Literal["adr", "cad", "ur"] = "adr"
    K_c: float = 4.0
    corona_samples: int = 64
    chain_budget: float = 4.0
    theta_floor: float = 1e-3

    @field_validator("eta")
    @classmethod
    def _eta(cls, v):
        if not 0 < v < 1:
            raise ValueError("eta must lie in (0, 1)")
        return v

    @field_validator("K")
    @classmethod
    def _K(cls, v):
        floor = max(40.0 ** 2 * BOUNDARY_DIM, 1e4 * BOUNDARY_DIM)
        if v < floor:
            raise ValueError(f"K must be at least {floor:g}")
        return v

    @field_validator("tau")
    @classmethod
    def _tau(cls, v):
        if not 0 < v <= TAU_0 / 4:
            raise ValueError(f"tau must lie in (0, {TAU_0 / 4:g}]")
        return v


class FieldSpec(_Section):
    name: Literal["coordinate", "re_power", "im_power", "poisson_interval", "log_potential", "constant", "wos"] = "coordinate"
    params: Dict[str, Union[float, List[float]]] = Field(default_factory=dict)


class SolverSpec(_Section):
    budget: int = Field(default=10_000, ge=1)
    eps_scale: float = Field(default=1e-4, gt=0)
    step_cap: int = Field(default=10_000, ge=1)
    boundary: FieldSpec = Field(default_factory=lambda: FieldSpec(name="poisson_interval"))


class EstimateSpec(_Section):
    kappa: float = Field(default=1.0, gt=0)
    r: float = Field(default=0.5, gt=0)
    ball_levels: int = Field(default=4, ge=1, le=12)
    ball_centers: int = Field(default=9, ge=1)
    interior_samples: int = Field(default=64, ge=1)
    polar_nodes: int = Field(default=48, ge=4)
    kappa_pair: Tuple[float, float] = (0.5, 2.0)
    q: float = Field(default=2.0, gt=0)


class JnSpec(_Section):
    alpha: float = Field(default=0.5, gt=0, lt=1)
    p: float = Field(default=2.0, gt=0)
    n_cap: float = Field(default=2.0 ** 20, gt=0)
    t_points: int = Field(default=32, ge=2)
    ensemble: int = Field(default=8, ge=0)


class GoodLambdaSpec(_Section):
    eps: List[float] = Field(default_factory=lambda: [0.5, 1.0])
    gamma: List[float] = Field(default_factory=lambda: [2.0 ** -4, 2.0 ** -3, 2.0 ** -2, 2.0 ** -1])
    q: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0])


class NsSpec(_Section):
    q: float = Field(default=4.0, gt=0)
    all_q: bool = False
    gated: bool = True
    eps: float = Field(default=0.5, gt=0)
    gamma: float = Field(default=0.125, gt=0)


class RieszSpec(_Section):
    eps: List[float] = Field(default_factory=lambda: [2.0 ** -k for k in range(2, 9)])
    ensemble: int = Field(default=16, ge=1)
    spacing: float = Field(default=2.0 ** -10, gt=0)
    iterations: int = Field(default=30, ge=1)


class TransferSpec(_Section):
    mode: Literal["ur", "cad"] = "ur"


class ExperimentConfig(_Section):
    """Everything that determines an experiment's outputs."""

    scenario: str = "flat"
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    out: str = "out"
    workers: int = Field(default=1, ge=1)
    depth: int = Field(default=8, ge=1, le=24)
    quadrature_level: int = Field(default=2, ge=0, le=6)
    stability_band: float = Field(default=0.3, gt=0)
    set: Optional[SetSpec] = None
    window: Optional[WindowSpec] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    structure: StructureParams = Field(default_factory=StructureParams)
    field: FieldSpec = Field(default_factory=FieldSpec)
    field_h: Optional[FieldSpec] = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    estimate: EstimateSpec = Field(default_factory=EstimateSpec)
    jn: JnSpec = Field(default_factory=JnSpec)
    good_lambda: GoodLambdaSpec = Field(default_factory=GoodLambdaSpec)
    ns: NsSpec = Field(default_factory=NsSpec)
    riesz: RieszSpec = Field(default_factory=RieszSpec)
    transference: TransferSpec = Field(default_factory=TransferSpec)

    def config_hash(self) -> str:
        """SHA-256 of the canonical dump; worker count and output directory do not change results."""
        blob = json.dumps(self.model_dump(mode="json", exclude={"workers", "out"}), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, **values: Any) -> "ExperimentConfig":
        data = self.model_dump(exclude_unset=True)
        data.update({k: v for k, v in values.items() if v is not None})
        return build_config(data)


TOP_LEVEL = {"scenario", "seed", "out", "workers", "depth", "quadrature_level", "stability_band"}


def _coerce(raw: str) -> Any:
    """INI values: JSON when it parses, the plain string otherwise."""
    try:
        return json.loads(raw)
    except (json.JSONDecodeError, ValueError):
        return raw.strip()


def _apply_env(data: Dict[str, Any]):
    for name, raw in sorted(os.environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        value = _coerce(raw)
        if section == "experiment":
            data[key] = value
        else:
            data.setdefault(section, {})[key] = value


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        where = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise InputError(f"invalid configuration: {where}", locations=[err["loc"] for err in e.errors()]) from None


def load_config(path: Optional[str] = None, use_env: bool = True) -> ExperimentConfig:
    """Read an INI config, then apply ``CARLESON_<SECTION>__<KEY>`` environment overrides."""
    data: Dict[str, Any] = {}
    if path is not None:
        file = Path(path)
        if not file.exists():
            raise InputError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(file, encoding="utf-8")
        except configparser.Error as e:
            raise InputError(f"malformed config {path}: {e}") from None
        for section in parser.sections():
            values = {k: _coerce(v) for k, v in parser.items(section)}
            if section == "experiment":
                data.update(values)
            else:
                data[section] = values
    if use_env:
        load_dotenv()
        _apply_env(data)
    return build_config(data)
