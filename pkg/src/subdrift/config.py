"""Experiment configuration: YAML documents validated by pydantic, plus builders for library objects."""
import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .chain.kernels import BirthDeathChain, FiniteKernel, IdentityKernel
from .chain.sets import from_dict as set_from_dict
from .domproc.process import INV_E, DominatingProcess, DomParams
from .drift import default_grid
from .errors import ContractError
from .planner import SubsamplePlan, plan_from_catalog, plan_from_rate
from .rates import make_R, rate_seq, safe_ceil
from .scales import from_spec
from .zoo import calibrate_zoo, shipped


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --------------------------------------------------------------------------
# building blocks


class ScaleCfg(Strict):
    family: Literal["power", "exponential", "constant", "dom_power", "table"]
    exponent: float | None = None
    shift: float | None = None
    coef: float | None = Field(None, gt=0)
    rate: float | None = None
    value: float | None = Field(None, ge=1)
    pair: bool | None = None
    alpha: float | None = Field(None, gt=0)
    values: list[float] | None = None

    def build(self):
        return from_spec(self.model_dump(exclude_none=True))


class SetCfg(Strict):
    type: Literal["interval", "finite", "level", "union", "everything"]
    lo: float | None = None
    hi: float | None = None
    coord: int | None = None
    members: list[Union[int, float, list[float]]] | None = None
    scale: ScaleCfg | None = None
    level: float | None = None
    parts: list["SetCfg"] | None = None

    def build(self):
        d = self.model_dump(exclude_none=True)
        if self.type == "finite" and self.members is not None:
            d["members"] = [tuple(m) if isinstance(m, list) else m for m in self.members]
        return set_from_dict(d)


class RateSeqCfg(Strict):
    """Rate sequence ``r`` used to plan the schedule."""

    family: Literal["linear", "polynomial", "log-power", "constant"]
    scale: float | None = None
    offset: float | None = None
    p: float | None = None
    shift: float | None = None
    alpha: float | None = None
    value: float | None = None

    def build(self):
        d = self.model_dump(exclude_none=True)
        return rate_seq(d.pop("family"), **d)


class RateCfg(Strict):
    """Rate function ``R`` whose moment of the return time is estimated."""

    family: Literal["geometric", "polynomial", "power", "subgeometric", "logarithmic"]
    kappa: float | None = None
    alpha: float | None = None
    exponent: float | None = None
    c: float | None = None

    def build(self):
        d = self.model_dump(exclude_none=True)
        return make_R(d.pop("family"), **d)


class ScheduleCfg(Strict):
    """Subsampling schedule: ``constant``, the countdown coordinate of the dominating process,
    or ``max(1, ceil(coef * scale(x)**exponent))``."""

    family: Literal["constant", "countdown", "scale-power"]
    value: int | None = Field(None, ge=1)
    coef: float = Field(1.0, gt=0)
    exponent: float = 1.0
    scale: ScaleCfg | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.family == "constant" and self.value is None:
            raise ValueError("constant schedule needs 'value'")
        if self.family == "scale-power" and self.scale is None:
            raise ValueError("scale-power schedule needs 'scale'")
        return self

    def build(self):
        if self.family == "constant":
            v = self.value
            return lambda x: v
        if self.family == "countdown":
            return DominatingProcess.n_fn
        scale, coef, e = self.scale.build(), self.coef, self.exponent
        return lambda x: int(max(1.0, safe_ceil(coef * math.exp(e * float(scale.log(x))))))


class PhiCfg(Strict):
    """``phi(t) = coef * t**exponent``."""

    family: Literal["power"] = "power"
    coef: float = Field(gt=0)
    exponent: float = Field(ge=0, le=1)

    def build(self):
        c, e = self.coef, self.exponent
        return lambda t: c * np.asarray(t, dtype=float) ** e


# --------------------------------------------------------------------------
# kernels


class ZooKernelCfg(Strict):
    type: Literal["zoo"]
    name: Literal["zoo-s8", "zoo-s4", "lazy-bd50"] | None = None
    s: float | None = Field(None, gt=2)
    d: float | None = Field(None, ge=0)
    c: float | None = Field(None, gt=0)
    lazy: float = Field(0.0, ge=0, lt=1)
    upper: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _one_of(self):
        custom = (self.s, self.d, self.c)
        if self.name is None and None in custom:
            raise ValueError("give either 'name' or all of 's', 'd', 'c'")
        if self.name is not None and (any(v is not None for v in custom) or self.lazy or self.upper is not None):
            raise ValueError("'name' selects a shipped calibration; drop 's', 'd', 'c', 'lazy' and 'upper'")
        return self

    def calibration(self):
        if self.name is not None:
            return shipped(self.name)
        return calibrate_zoo(self.s, self.d, self.c, self.lazy, self.upper)


class BirthDeathCfg(Strict):
    type: Literal["birth-death"]
    a: float = Field(0.5, ge=0, le=1)
    d: float = 0.0
    p_min: float = Field(0.0, ge=0, le=1)
    p_max: float = Field(1.0, ge=0, le=1)
    lazy: float = Field(0.0, ge=0, lt=1)
    upper: int | None = Field(None, ge=1)


class FiniteCfg(Strict):
    type: Literal["finite"]
    matrix: str


class DomCfg(Strict):
    type: Literal["domproc"]
    beta: float = Field(gt=0, lt=INV_E)
    kappa: float = Field(1.0, ge=1)
    nstar: Literal["constant", "power", "log-power"] = "power"
    gamma: float = Field(0.0, ge=0)
    const: int = Field(1, ge=1)

    def params(self) -> DomParams:
        return DomParams(self.beta, self.kappa, self.nstar, self.gamma, self.const)


class IdentityCfg(Strict):
    type: Literal["identity"]


KernelCfg = Annotated[Union[ZooKernelCfg, BirthDeathCfg, FiniteCfg, DomCfg, IdentityCfg],
                      Field(discriminator="type")]


def read_matrix_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    """Row-stochastic matrix with a header row of state labels."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ContractError(f"{path}: need a header row and at least one matrix row")
    labels = [c.strip() for c in rows[0]]
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ContractError(f"{path}: non-numeric entry ({exc})") from None
    if body.shape != (len(labels), len(labels)):
        raise ContractError(f"{path}: {len(labels)} labels but matrix has shape {body.shape}")
    return body, labels


def build_kernel(cfg, base_dir: Path):
    if isinstance(cfg, ZooKernelCfg):
        return cfg.calibration().kernel()
    if isinstance(cfg, BirthDeathCfg):
        return BirthDeathChain(cfg.a, cfg.d, cfg.p_min, cfg.p_max, cfg.lazy, cfg.upper)
    if isinstance(cfg, FiniteCfg):
        P, labels = read_matrix_csv(resolve(cfg.matrix, base_dir))
        return FiniteKernel(P, labels)
    if isinstance(cfg, DomCfg):
        return DominatingProcess(cfg.params())
    return IdentityKernel()


def resolve(path: str, base_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base_dir / p


# --------------------------------------------------------------------------
# grids


class GridCfg(Strict):
    """States to check.

    ``list`` takes ``states`` verbatim; ``range`` is ``lo..hi`` by ``step``;
    ``geometric`` has ``points`` log-spaced values (rounded when ``integer``);
    ``default`` is log-spaced in ``V`` plus a dense sample of ``C``.  For the
    dominating process each value ``z`` becomes the state ``(z, m)`` with
    ``m = 1`` or ``m = n*(z)`` according to ``countdown``.
    """

    kind: Literal["list", "range", "geometric", "default"] = "list"
    states: list[Union[int, float, str, list[float]]] | None = None
    lo: float | None = None
    hi: float | None = None
    step: int = Field(1, ge=1)
    points: int | None = Field(None, ge=2)
    integer: bool = True
    points_per_decade: int = Field(32, ge=1)
    countdown: Literal["one", "nstar"] = "nstar"

    @model_validator(mode="after")
    def _needs(self):
        if self.kind == "list" and not self.states:
            raise ValueError("list grid needs nonempty 'states'")
        if self.kind in ("range", "geometric", "default") and (self.lo is None or self.hi is None):
            raise ValueError(f"{self.kind} grid needs 'lo' and 'hi'")
        if self.kind == "geometric" and self.points is None:
            raise ValueError("geometric grid needs 'points'")
        return self

    def values(self, V=None, C=None) -> list:
        if self.kind == "list":
            return list(self.states)
        if self.kind == "range":
            return list(range(int(self.lo), int(self.hi) + 1, self.step))
        if self.kind == "geometric":
            g = np.geomspace(self.lo, self.hi, self.points)
            if self.integer:
                return sorted({int(round(v)) for v in g})
            return [float(v) for v in g]
        if V is None:
            raise ContractError("a default grid needs a scale V")
        return default_grid(V, int(self.lo), int(self.hi), C, self.points_per_decade)


def build_states(values, kernel) -> list:
    """Map raw grid values to kernel states."""
    out = []
    for v in values:
        if isinstance(kernel, DominatingProcess):
            if isinstance(v, list):
                out.append((float(v[0]), int(v[1])))
            else:
                out.append((float(v), None))
        elif isinstance(kernel, FiniteKernel) and isinstance(v, str):
            if v not in kernel.labels:
                raise ContractError(f"unknown state label {v!r}; labels are {kernel.labels}")
            out.append(kernel.labels.index(v))
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and float(v).is_integer():
            out.append(int(v))
        else:
            raise ContractError(f"state {v!r} is not valid for {type(kernel).__name__}")
    return out


def dom_states(values, kernel: DominatingProcess, countdown: str) -> list:
    p = kernel.params
    out = []
    for z, m in build_states(values, kernel):
        if m is None:
            m = 1 if countdown == "one" else p.n_star(z)
        out.append((z, m))
    return out


def grid_states(grid: GridCfg, kernel, V=None, C=None) -> list:
    vals = grid.values(V, C)
    if isinstance(kernel, DominatingProcess):
        return dom_states(vals, kernel, grid.countdown)
    return build_states(vals, kernel)


# --------------------------------------------------------------------------
# plans


class PlanCfg(Strict):
    """Subsampling plan: from a rate sequence, from the catalog, or spelled out (``manual``)."""

    source: Literal["rate", "catalog", "manual"]
    beta: float = Field(gt=0, lt=1)
    beta_prime: float = Field(gt=0, lt=1)
    b: float = Field(ge=0)
    r: RateSeqCfg | None = None
    V: ScaleCfg | None = None
    W: ScaleCfg | None = None
    C_const: float = Field(1.0, gt=0)
    phi_family: Literal["log-power", "poly", "near-linear"] | None = None
    alpha: float | None = Field(None, gt=0)
    c_prime: float = Field(1.0, gt=0)
    n: ScheduleCfg | None = None
    C: SetCfg | None = None

    @model_validator(mode="after")
    def _needs(self):
        if not self.beta < self.beta_prime:
            raise ValueError("need beta < beta_prime")
        need = {"rate": ("r", "V", "W"), "catalog": ("phi_family", "V", "alpha"), "manual": ("n", "W", "C")}
        missing = [k for k in need[self.source] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.source} plan needs {missing}")
        return self

    def build(self) -> SubsamplePlan:
        if self.source == "rate":
            return plan_from_rate(self.r.build(), self.V.build(), self.W.build(), self.C_const, self.beta,
                                  self.beta_prime, self.b)
        if self.source == "catalog":
            return plan_from_catalog(self.phi_family, self.V.build(), self.alpha, self.c_prime, self.beta,
                                     self.beta_prime, self.b)
        return SubsamplePlan(self.n.build(), self.W.build(), self.beta, self.beta_prime, self.b, self.C.build(),
                             {"kind": "manual"})


# --------------------------------------------------------------------------
# commands


class MCCfg(Strict):
    mode: Literal["auto", "exact", "mc"] = "auto"
    replicates: int = Field(10_000, ge=2)
    mc_budget: int = Field(1_000_000, ge=2)
    z: float = Field(3.0, gt=0)
    step_budget: int = Field(10_000_000, ge=1)


class DriftCfg(MCCfg):
    variant: Literal["one-step-geometric", "phi-subgeometric", "double-control", "subsampled", "nested"]
    calibration: bool = False
    V: ScaleCfg | None = None
    W: ScaleCfg | None = None
    beta: float | None = Field(None, gt=0, lt=1)
    b: float | None = Field(None, ge=0)
    C: SetCfg | None = None
    phi: PhiCfg | None = None
    n: ScheduleCfg | None = None
    R: RateCfg | None = None
    k_range: list[int] | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.calibration:
            if self.variant not in ("phi-subgeometric", "double-control"):
                raise ValueError("calibration supplies phi-subgeometric or double-control specs only")
            return self
        need = {"one-step-geometric": ("V", "beta", "b", "C"), "phi-subgeometric": ("V", "phi", "b", "C"),
                "double-control": ("V", "W", "b", "C"), "subsampled": ("W", "n", "beta", "b", "C"),
                "nested": ("R", "W", "n", "b", "C", "k_range")}
        missing = [k for k in need[self.variant] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.variant} needs {missing}")
        return self


class Base(Strict):
    master_seed: int = Field(ge=0, lt=2 ** 64)
    out: str | None = None


class VerifyDriftConfig(Base):
    command: Literal["verify-drift"]
    kernel: KernelCfg
    drift: DriftCfg
    grid: GridCfg


class PlanSubsampleConfig(Base):
    command: Literal["plan-subsample"]
    plan: PlanCfg
    grid: GridCfg
    kernel: KernelCfg | None = None
    verify: MCCfg | None = None


class ClassifyTameConfig(Base):
    command: Literal["classify-tame"]
    plan: PlanCfg
    delta: float = Field(gt=0, lt=1)
    grid: GridCfg


class ConstructTameConfig(Base):
    command: Literal["construct-tame"]
    alpha: float = Field(gt=0, lt=1)
    c0: float = Field(1.0, gt=0)
    V: ScaleCfg | None = None
    grid: GridCfg | None = None


class EstimateMomentConfig(Base):
    command: Literal["estimate-moment"]
    kernel: KernelCfg
    x0: Union[int, str, list[float]]
    C: SetCfg
    R: RateCfg
    replicates: int = Field(ge=2)
    cap: int | None = Field(None, ge=1)
    kind: Literal["return", "hitting"] = "return"


class BoundSweepConfig(Base):
    command: Literal["bound-sweep"]
    kernel: KernelCfg
    plan: PlanCfg
    R: RateCfg
    grid: GridCfg
    replicates: int = Field(ge=2)
    cap: int | None = Field(None, ge=1)
    tol: float = Field(0.2, ge=0)
    case: Literal["auto", "i", "ii"] = "auto"
    accessible: SetCfg | None = None
    admissibility_grid: GridCfg | None = None


class AlphaBetaExp(Strict):
    name: Literal["alpha-beta"]
    betas: list[float] = Field(min_length=1)


class Prop42Exp(Strict):
    name: Literal["moment-scaling"]
    case: Literal["i", "ii", "iii"]
    alpha: float = Field(gt=0, lt=1)
    eta: float | None = Field(None, gt=0)
    z: list[float] = Field(min_length=2)
    replicates: int = Field(ge=2)
    cap: int | None = Field(None, ge=1)
    tol: float = Field(0.2, ge=0)
    slope_tol: float = Field(0.1, ge=0)


class SharpnessExp(Strict):
    name: Literal["drift-sharpness"]
    alpha: float = Field(gt=0, lt=1)
    z: list[float] = Field(min_length=1)
    replicates: int = Field(ge=2)
    n_sigma: float = Field(3.0, gt=0)


class YTailExp(Strict):
    name: Literal["y-tail"]
    u: list[float] = Field(min_length=1)
    samples: int = Field(ge=2)
    points: int = Field(20, ge=2)
    span: float = Field(1000.0, gt=1)
    n_sigma: float = Field(3.0, gt=0)


class YUExp(Strict):
    name: Literal["y-u-consistency"]
    y0: float = Field(ge=1)
    horizon: int = Field(ge=1)
    samples: int = Field(ge=2)
    level: float = Field(1e-3, gt=0, lt=1)


class PathwiseExp(Strict):
    name: Literal["pathwise"]
    alpha: float = Field(gt=0, lt=1)
    w_coef: float = Field(1.0, gt=0)
    R: RateCfg
    z0: float = Field(ge=1)
    replicates: int = Field(ge=1)


ExperimentCfg = Annotated[Union[AlphaBetaExp, Prop42Exp, SharpnessExp, YTailExp, YUExp, PathwiseExp],
                          Field(discriminator="name")]


class DomprocExperimentConfig(Base):
    command: Literal["domproc-experiment"]
    kernel: DomCfg
    experiment: ExperimentCfg


class WNormConfig(Base):
    command: Literal["wnorm-diagnostic"]
    kernel: KernelCfg
    calibration: bool = False
    V: ScaleCfg | None = None
    W: ScaleCfg | None = None
    b: float | None = Field(None, ge=0)
    C: SetCfg | None = None
    n_max: int = Field(ge=2)
    pairs: list[tuple[Union[int, str], Union[int, str]]] | None = None
    x0: Union[int, str, None] = None
    stride: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _needs(self):
        if not self.calibration and (self.V is None or self.W is None):
            raise ValueError("give V and W or set calibration: true")
        return self


ExperimentConfig = Annotated[Union[VerifyDriftConfig, PlanSubsampleConfig, ClassifyTameConfig, ConstructTameConfig,
                                   EstimateMomentConfig, BoundSweepConfig, DomprocExperimentConfig, WNormConfig],
                             Field(discriminator="command")]

COMMANDS = ("verify-drift", "plan-subsample", "classify-tame", "construct-tame", "estimate-moment", "bound-sweep",
            "domproc-experiment", "wnorm-diagnostic")


class _Holder(Strict):
    config: ExperimentConfig


# --------------------------------------------------------------------------
# loading


class ConfigError(Exception):
    """Raised with human-readable, line-annotated diagnostics."""


def _node_at(node, loc):
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
    return node


def format_validation_error(err: ValidationError, text: str) -> str:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        root = None
    lines = []
    for e in err.errors():
        loc = [p for p in e["loc"][1:] if not (isinstance(p, str) and p in COMMANDS + _DISCRIMINATED)]
        where = ".".join(str(p) for p in loc) or "<root>"
        line = ""
        if root is not None:
            node = _node_at(root, loc)
            line = f" (line {node.start_mark.line + 1})"
        lines.append(f"{where}{line}: {e['msg']}")
    return "\n".join(lines)


# tags pydantic inserts into error locations for tagged unions
_DISCRIMINATED = ("zoo", "birth-death", "finite", "domproc", "identity", "alpha-beta", "moment-scaling",
                  "drift-sharpness", "y-tail", "y-u-consistency", "pathwise")


def parse_config(text: str, command: str | None = None):
    """Validate a YAML document (or the ``config`` block of a previous report)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    if "results" in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]
        text = yaml.safe_dump(doc, sort_keys=False)
    if command is not None:
        given = doc.get("command")
        if given is None:
            doc = {"command": command, **doc}
        elif given != command:
            raise ConfigError(f"config is for command {given!r}, not {command!r}")
    if "master_seed" not in doc:
        raise ConfigError("master_seed: field required (all randomness derives from it)")
    try:
        cfg = _Holder.model_validate({"config": doc}).config
    except ValidationError as err:
        raise ConfigError(format_validation_error(err, text)) from None
    return cfg, doc


def load_config(path: Path, command: str | None = None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, command)


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()
