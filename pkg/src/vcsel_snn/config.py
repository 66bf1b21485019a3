"""Experiment configuration and its YAML representation.

The file has four sections: ``laser`` (model constants, operating point,
integration settings and the calibration grid), ``pipeline`` (masking and
waveform timing), ``detector`` (binarization) and ``experiment`` (seeds,
split sizes, sweep settings).
"""

import re
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from .errors import ConfigError
from .inputs import MASK_DISTRIBUTIONS
from .laser import DEFAULT_DT, LaserParams, SurrogateParams

MODELS = ("sfm", "surrogate")
THRESHOLD_MODES = ("auto", "manual")
SIM_MODES = ("continuous", "per_point")


@dataclass
class ExperimentConfig:
    n_nodes: int = 512
    theta: float = 250e-12
    sample_rate: float = 12e9
    gap: float = 2e-9
    train_per_class: int = 10
    seed: int = 7
    laser: object = field(default_factory=LaserParams)
    threshold_mode: str = "auto"
    simulation_mode: str = "continuous"
    threshold: float = None
    latency_offset: float = 0.0
    auto_k: float = 5.0
    mask_distribution: str = "uniform11"
    order: str = "species"
    dt: float = DEFAULT_DT
    trace_sample_period: float = 5e-12
    threads: int = 1
    intercept: bool = False
    dataset: str = None
    calibration: dict = None
    search_grid: dict = None
    sweep_sizes: str = "1:49"
    sweep_runs: int = 10
    resimulate: bool = False

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigError("pipeline.n_nodes must be at least 1")
        if not 1 <= self.train_per_class <= 49:
            raise ConfigError("experiment.train_per_class must lie in [1, 49]")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ConfigError(f"detector.threshold_mode must be one of {THRESHOLD_MODES}")
        if self.threshold_mode == "manual" and (self.threshold is None or self.threshold <= 0):
            raise ConfigError("detector.threshold must be a positive power for manual threshold mode")
        if self.simulation_mode not in SIM_MODES:
            raise ConfigError(f"laser.simulation_mode must be one of {SIM_MODES}")
        if self.mask_distribution not in MASK_DISTRIBUTIONS:
            raise ConfigError(f"pipeline.mask_distribution must be one of {MASK_DISTRIBUTIONS}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def model(self):
        return "surrogate" if isinstance(self.laser, SurrogateParams) else "sfm"

    def to_dict(self):
        laser = {"model": self.model}
        laser.update(self.laser.to_dict())
        laser.update({
            "dt": self.dt,
            "trace_sample_period": self.trace_sample_period,
            "simulation_mode": self.simulation_mode,
            "calibration": self.calibration,
            "search_grid": self.search_grid,
        })
        return {
            "laser": laser,
            "pipeline": {
                "n_nodes": self.n_nodes,
                "theta": self.theta,
                "sample_rate": self.sample_rate,
                "gap": self.gap,
                "mask_distribution": self.mask_distribution,
                "order": self.order,
            },
            "detector": {
                "threshold_mode": self.threshold_mode,
                "threshold": self.threshold,
                "latency_offset": self.latency_offset,
                "auto_k": self.auto_k,
            },
            "experiment": {
                "seed": self.seed,
                "train_per_class": self.train_per_class,
                "intercept": self.intercept,
                "threads": self.threads,
                "dataset": self.dataset,
                "sweep": {"sizes": self.sweep_sizes, "runs": self.sweep_runs, "resimulate": self.resimulate},
            },
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping with laser/pipeline/detector/experiment sections")
        unknown = set(d) - {"laser", "pipeline", "detector", "experiment"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        laser = dict(d.get("laser") or {})
        pipe = dict(d.get("pipeline") or {})
        det = dict(d.get("detector") or {})
        exp = dict(d.get("experiment") or {})
        sweep = dict(exp.pop("sweep", None) or {})
        kw = {}
        model = laser.pop("model", "sfm")
        for key in ("dt", "trace_sample_period", "simulation_mode", "calibration", "search_grid"):
            if key in laser:
                kw[key] = laser.pop(key)
        if model not in MODELS:
            raise ConfigError(f"laser.model must be one of {MODELS}")
        pcls = LaserParams if model == "sfm" else SurrogateParams
        kw["laser"] = _build(pcls, laser, "laser")
        kw.update(_pick(pipe, ("n_nodes", "theta", "sample_rate", "gap", "mask_distribution", "order"), "pipeline"))
        kw.update(_pick(det, ("threshold_mode", "threshold", "latency_offset", "auto_k"), "detector"))
        kw.update(_pick(exp, ("seed", "train_per_class", "intercept", "threads", "dataset"), "experiment"))
        s = _pick(sweep, ("sizes", "runs", "resimulate"), "experiment.sweep")
        for k, v in s.items():
            kw["sweep_" + k if k != "resimulate" else k] = v
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def _pick(section, keys, name):
    extra = set(section) - set(keys)
    if extra:
        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
    return {k: section[k] for k in keys if k in section}


def _build(pcls, values, name):
    names = {f.name for f in fields(pcls)}
    extra = set(values) - names
    if extra:
        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
    try:
        return pcls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``2e-9`` and ``-8.0e9`` as floats (YAML 1.1 wants ``2.0e-09``)."""


_Loader.yaml_implicit_resolvers = {k: list(v) for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()}
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                  |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                  |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                  |[-+]?\.(?:inf|Inf|INF)
                  |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.load(fh, Loader=_Loader)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return ExperimentConfig.from_dict(data or {})


def dump_config(config, path, header=None):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


def grid_values(entry, name):
    """Expand a grid given as a list or as ``{start, stop, num}``."""
    if entry is None:
        raise ConfigError(f"{name} is missing")
    if isinstance(entry, dict):
        try:
            values = np.linspace(float(entry["start"]), float(entry["stop"]), int(entry["num"]))
        except KeyError as exc:
            raise ConfigError(f"{name} needs start, stop and num (missing {exc.args[0]})") from exc
    else:
        values = np.atleast_1d(np.asarray(entry, dtype=float))
    if values.size == 0:
        raise ConfigError(f"{name} is empty")
    return values


def parse_sizes(text):
    """``"1:49"`` (inclusive), ``"1:49:2"`` or ``"1,2,5,10"``."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, stride = parts
            sizes = list(range(start, stop + 1, stride))
        else:
            sizes = [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse training sizes {text!r}") from exc
    if not sizes:
        raise ConfigError(f"training sizes {text!r} select nothing")
    return sizes


DEFAULT_GRID = {
    "injection_amplitude": {"start": 0.145, "stop": 0.17, "num": 26},
    "detuning": [-8.0e9, -6.0e9, -4.0e9],
    "target_margin": 0.07,
    "reference_drop": 0.3,
}


TEMPLATE = """\
# Configuration for the single-VCSEL spiking network simulator.
# Units are SI throughout (seconds, 1/s, Hz). Every key is optional; the
# values below are the defaults.

laser:
  model: sfm                    # sfm: spin-flip VCSEL with optical injection; surrogate: two-variable excitable stand-in
  field_decay_rate: {field_decay_rate!r}     # photon field decay rate kappa, 1/s
  carrier_decay_rate: {carrier_decay_rate!r}      # carrier recovery rate, 1/s
  linewidth_enhancement: {linewidth_enhancement!r}    # alpha factor
  spin_relaxation_rate: {spin_relaxation_rate!r}    # spin-flip rate, 1/s
  birefringence_rate: {birefringence_rate!r}  # linear birefringence, rad/s
  dichroism_rate: {dichroism_rate!r}       # linear dichroism, 1/s; positive favors the x polarization
  bias_pump: {bias_pump!r}                # pump relative to threshold
  injection_amplitude: {injection_amplitude!r}     # injected field at zero modulation (normalized units)
  detuning: {detuning!r}              # master minus subsidiary-mode frequency, Hz; negative = red-detuned
  noise_strength: {noise_strength!r}           # spontaneous-emission noise amplitude; 0 = deterministic
  modulation_depth: {modulation_depth!r}        # fractional injection change at drive level 1
  modulation_sense: {modulation_sense}        # drop: drive lowers injected power; rise: raises it
  readout: {readout}           # subsidiary: |E_y|^2 only; total: |E_x|^2 + |E_y|^2
  dt: {dt!r}                    # RK4 step, s (at most 0.5 ps)
  trace_sample_period: {trace_sample_period!r}   # output trace spacing, s (integer multiple of dt)
  simulation_mode: {simulation_mode}  # continuous: one pass over the waveform; per_point: restart each point from rest
  calibration: {calibration}  # filled in by `calibrate`; `run` refuses to start while this is null
  search_grid:                  # consulted by `calibrate`
    injection_amplitude: {{start: 0.145, stop: 0.17, num: 26}}
    detuning: [-8.0e9, -6.0e9, -4.0e9]
    target_margin: 0.07         # preferred fractional distance above the locking edge
    reference_drop: 0.3         # fractional injection dip of the test pulse that must fire exactly one spike

pipeline:
  n_nodes: {n_nodes}                  # virtual nodes per data point
  theta: {theta!r}                  # node duration, s
  sample_rate: {sample_rate!r}          # drive waveform sample rate, samples/s
  gap: {gap!r}                    # zero-modulation time between data points, s
  mask_distribution: {mask_distribution}   # uniform01, uniform11 or bernoulli
  order: {order}                # species: setosa, versicolor, virginica blocks; given: file order

detector:
  threshold_mode: {threshold_mode}          # auto: midpoint of median and peak; manual: use `threshold`
  threshold: {threshold}               # absolute power for manual mode
  latency_offset: {latency_offset!r}          # shift of all node bins, s
  auto_k: {auto_k!r}                   # IQR multiple for the no-spike fallback of auto mode

experiment:
  seed: {seed}                       # mask, split and noise seed
  train_per_class: {train_per_class}           # training points per class (1..49)
  intercept: false              # append a constant column before the readout fit
  threads: 1                    # workers for per_point simulation; results do not depend on it
  dataset: null                 # Iris CSV path; null = bundled copy
  sweep:
    sizes: "{sweep_sizes}"               # inclusive start:stop[:step] or comma list
    runs: {sweep_runs}                     # split seeds per size
    resimulate: false           # re-simulate the laser for every run instead of reusing one raster
"""


def template_text(config=None):
    """Commented YAML template holding the values of ``config`` (defaults if omitted)."""
    config = config or default_config()
    if not isinstance(config.laser, LaserParams):
        raise ConfigError("the commented template describes the sfm model only")
    values = {}
    values.update(config.laser.to_dict())
    for f in fields(config):
        if f.name != "laser":
            values[f.name] = getattr(config, f.name)
    values["calibration"] = yaml.safe_dump(config.calibration, default_flow_style=True).strip() \
        if config.calibration else "null"
    values["threshold"] = "null" if config.threshold is None else repr(config.threshold)
    return TEMPLATE.format(**values)


def default_config():
    return ExperimentConfig(search_grid=dict(DEFAULT_GRID))
