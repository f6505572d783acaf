"""Run configuration and its ``key = value`` file format."""

import dataclasses
from dataclasses import dataclass, field

from .errors import InvalidInputError
from .solvers import BpParams

__all__ = ["DEFAULT_T0", "DEFAULT_R0", "RunConfig", "parse_config_text", "load_config_file"]

# threshold pair calibrated on a reference block
DEFAULT_T0 = 0.734166
DEFAULT_R0 = 31.970006

SOLVERS = ("omp", "bp")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a reconstruction run.

    ``eps`` is the OMP residual threshold.  ``max_iters``, ``stages`` and
    ``crossover`` are passed to basis pursuit together with ``alpha`` and
    ``beta``; ``workers`` only affects speed, never results.
    """

    block_size: int = 32
    rate: float = 0.75
    seed: int = 0
    solver: str = "bp"
    alpha: float = 0.001
    beta: float = 0.75
    eps: float = 1e-6
    t0: float = DEFAULT_T0
    r0: float = DEFAULT_R0
    max_value: float = 255.0
    max_iters: int = 5000
    stages: int = 8
    crossover: bool = True
    workers: int = 1
    images: tuple = field(default=(), compare=False)
    out: str = field(default="out", compare=False)

    def __post_init__(self):
        if self.block_size < 1:
            raise InvalidInputError(f"block size must be >= 1, got {self.block_size}")
        if not 0 < self.rate <= 1:
            raise InvalidInputError(f"rate must lie in (0, 1], got {self.rate}")
        if self.solver not in SOLVERS:
            raise InvalidInputError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if not 0 < self.alpha < 0.5:
            raise InvalidInputError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise InvalidInputError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.eps >= 0:
            raise InvalidInputError("eps must be >= 0")
        if not self.max_value > 0:
            raise InvalidInputError("max_value must be positive")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    def bp_params(self):
        return BpParams(
            alpha=self.alpha,
            beta=self.beta,
            max_iters=self.max_iters,
            stages=self.stages,
            crossover=self.crossover,
        )

    def echo(self):
        """The settings that shape the results, as plain JSON types."""
        d = dataclasses.asdict(self)
        for k in ("images", "out", "workers"):
            d.pop(k)
        d["bp"] = dataclasses.asdict(self.bp_params())
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
# command-line spellings accepted in config files too
_ALIASES = {"block-size": "block_size", "image": "images", "max-iters": "max_iters"}


def _convert(name, text):
    if name == "images":
        return tuple(t for t in text.replace(",", " ").split() if t)
    default = _FIELDS[name].default
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise InvalidInputError(f"{name}: expected a boolean, got {text!r}")
    try:
        return type(default)(text)
    except ValueError:
        raise InvalidInputError(f"{name}: cannot parse {text!r}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of typed :class:`RunConfig` fields.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in _FIELDS:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    return values


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as err:
        raise InvalidInputError(f"cannot read config file {path}: {err.strerror}") from None
