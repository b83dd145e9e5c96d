"""JSON experiment configuration.

A config is a nested JSON object; every section is optional and falls back
to the defaults in ``DEFAULTS``. Unknown keys are logged as warnings, type
and range violations raise :class:`ConfigError` anchored to the line where
the offending key appears in the source text.

Sweeps are a list of ``{"path": "section.key", "values": [...]}``; several
sweeps expand to their cartesian product in declaration order.
"""

from __future__ import annotations

import copy
import itertools
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .diffusion import ABLATIONS, VARIANTS, AffinityTransforms, DiffusionConfig
from .errors import ConfigError, PodiffError
from .frontend import GUIDANCE_CHANNELS
from .scenes import PRESET_NAMES, SamplePattern, SceneSpec, load_preset

logger = logging.getLogger(__name__)

DEFAULTS: dict = {
    "scenes": list(PRESET_NAMES),
    "sampling": {"mode": "uniform-random", "ratio": 0.05, "count": None, "row_step": 4},
    "noise": {"outlier_frac": 0.0, "magnitude": 0.3, "boundary_bias": 4.0},
    "coarse": {"mode": "perturbed", "amplitude": 0.1},
    "normals": {"mode": "exact"},
    "frontend": {"k": 8, "p": 2.0, "w": 2, "b": 1.0, "depth_max": 20.0, "channels": list(GUIDANCE_CHANNELS)},
    "diffusion": {
        "kernel": 5,
        "iterations": 8,
        "variant": "asymmetric-cosine",
        "sigma": 1.0,
        "temperature": 0.01,
        "use_replacement": True,
        "use_confidence": True,
        "eps_ray": 1e-3,
    },
    "affinity": None,
    "ablations": list(ABLATIONS),
    "sweeps": [],
    "output_dir": "results",
    "seed": 0,
}


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _int(x):
    return isinstance(x, int) and not isinstance(x, bool)


# (predicate, description) per leaf key
_RULES = {
    "sampling.mode": (lambda x: x in ("uniform-random", "scanline"), "'uniform-random' or 'scanline'"),
    "sampling.ratio": (lambda x: _num(x) and 0 < x <= 1, "a number in (0, 1]"),
    "sampling.count": (lambda x: x is None or (_int(x) and x >= 0), "null or a non-negative integer"),
    "sampling.row_step": (lambda x: _int(x) and x >= 1, "an integer >= 1"),
    "noise.outlier_frac": (lambda x: _num(x) and 0 <= x <= 1, "a number in [0, 1]"),
    "noise.magnitude": (lambda x: _num(x) and 0 <= x < 1, "a number in [0, 1)"),
    "noise.boundary_bias": (lambda x: _num(x) and x > 0, "a positive number"),
    "coarse.mode": (lambda x: x in ("perturbed", "idw"), "'perturbed' or 'idw'"),
    "coarse.amplitude": (lambda x: _num(x) and 0 <= x < 1, "a number in [0, 1)"),
    "normals.mode": (lambda x: x in ("exact", "estimated"), "'exact' or 'estimated'"),
    "frontend.k": (lambda x: _int(x) and x >= 1, "an integer >= 1"),
    "frontend.p": (lambda x: _num(x) and x > 0, "a positive number"),
    "frontend.w": (lambda x: _int(x) and x >= 1, "an integer >= 1"),
    "frontend.b": (lambda x: _num(x) and x > 0, "a positive number"),
    "frontend.depth_max": (lambda x: _num(x) and x > 0, "a positive number"),
    "frontend.channels": (
        lambda x: isinstance(x, list) and len(x) > 0 and all(c in GUIDANCE_CHANNELS for c in x),
        f"a non-empty list drawn from {list(GUIDANCE_CHANNELS)}",
    ),
    "diffusion.kernel": (lambda x: _int(x) and x >= 3 and x % 2 == 1, "an odd integer >= 3"),
    "diffusion.iterations": (lambda x: _int(x) and x >= 0, "a non-negative integer"),
    "diffusion.variant": (lambda x: x in VARIANTS, f"one of {list(VARIANTS)}"),
    "diffusion.sigma": (lambda x: _num(x) and x > 0, "a positive number"),
    "diffusion.temperature": (lambda x: _num(x) and x > 0, "a positive number"),
    "diffusion.use_replacement": (lambda x: isinstance(x, bool), "true or false"),
    "diffusion.use_confidence": (lambda x: isinstance(x, bool), "true or false"),
    "diffusion.eps_ray": (lambda x: _num(x) and x > 0, "a positive number"),
    "ablations": (
        lambda x: isinstance(x, list) and len(x) > 0 and all(a in ABLATIONS for a in x),
        f"a non-empty list drawn from {list(ABLATIONS)}",
    ),
    "output_dir": (lambda x: isinstance(x, str) and x != "", "a non-empty string"),
    "seed": (lambda x: _int(x) and x >= 0, "a non-negative integer"),
}


def _line_of(text: str | None, path: str) -> int | None:
    """Best-effort line number of the last component of ``path`` in ``text``."""
    if not text:
        return None
    pos = 0
    for part in path.split("."):
        m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _get(d: dict, path: str):
    for part in path.split("."):
        d = d[part]
    return d


def _set(d: dict, path: str, value) -> None:
    parts = path.split(".")
    for part in parts[:-1]:
        d = d[part]
    d[parts[-1]] = value


def _merge(defaults: dict, user: dict, text: str | None, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        path = prefix + key
        if key not in defaults:
            line = _line_of(text, path)
            where = f" (line {line})" if line else ""
            logger.warning("unknown config key %r%s ignored", path, where)
            continue
        if isinstance(defaults[key], dict) and key != "affinity":
            if not isinstance(value, dict):
                raise ConfigError(f"{path!r} must be an object", _line_of(text, path))
            out[key] = _merge(defaults[key], value, text, path + ".")
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    data: dict
    source: str | None = None
    text: str | None = field(default=None, repr=False)

    def __post_init__(self):
        self.validate()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, user: dict, text: str | None = None, source: str | None = None) -> "ExperimentConfig":
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object", 1)
        return cls(_merge(DEFAULTS, user, text), source=source, text=text)

    @classmethod
    def from_json(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from exc
        return cls.from_dict(user, text=text, source=source)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
        return cls.from_json(text, source=str(path))

    # -- validation ---------------------------------------------------------

    def _fail(self, path: str, message: str):
        raise ConfigError(f"{path!r} {message}", _line_of(self.text, path))

    def validate(self) -> None:
        d = self.data
        for path, (ok, desc) in _RULES.items():
            value = _get(d, path)
            if not ok(value):
                self._fail(path, f"must be {desc}, got {value!r}")

        if not isinstance(d["scenes"], list) or not d["scenes"]:
            self._fail("scenes", "must be a non-empty list of preset names or scene objects")
        for i, s in enumerate(d["scenes"]):
            if isinstance(s, str):
                if s not in PRESET_NAMES:
                    self._fail("scenes", f"entry {i}: unknown preset {s!r}; choose from {list(PRESET_NAMES)}")
            elif isinstance(s, dict):
                try:
                    SceneSpec.from_dict(s)
                except PodiffError as exc:
                    self._fail("scenes", f"entry {i}: {exc}")
            else:
                self._fail("scenes", f"entry {i} must be a preset name or a scene object")

        if d["affinity"] is not None:
            try:
                T = AffinityTransforms.from_dict(d["affinity"])
            except (PodiffError, KeyError, TypeError, ValueError) as exc:
                self._fail("affinity", f"must be an object with matrices 'f' and optional 'g': {exc}")
            if T.f.shape[1] != len(d["frontend"]["channels"]):
                self._fail(
                    "affinity",
                    f"matrices take {T.f.shape[1]} features but {len(d['frontend']['channels'])} channels are configured",
                )

        if not isinstance(d["sweeps"], list):
            self._fail("sweeps", "must be a list")
        for i, sw in enumerate(d["sweeps"]):
            if not (isinstance(sw, dict) and isinstance(sw.get("path"), str) and isinstance(sw.get("values"), list)):
                self._fail("sweeps", f"entry {i} must be an object with 'path' and 'values'")
            if not sw["values"]:
                self._fail("sweeps", f"entry {i} has no values")
            if sw["path"] not in _RULES or sw["path"] in ("output_dir", "ablations"):
                self._fail("sweeps", f"entry {i}: {sw['path']!r} is not a sweepable config key")
            ok, desc = _RULES[sw["path"]]
            for v in sw["values"]:
                if not ok(v):
                    self._fail("sweeps", f"entry {i}: value {v!r} for {sw['path']!r} must be {desc}")

    # -- typed views --------------------------------------------------------

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output_dir"])

    def scenes(self) -> list[SceneSpec]:
        return [load_preset(s) if isinstance(s, str) else SceneSpec.from_dict(s) for s in self.data["scenes"]]

    def sample_pattern(self, seed: int) -> SamplePattern:
        s = self.data["sampling"]
        return SamplePattern(mode=s["mode"], ratio=s["ratio"], count=s["count"], row_step=s["row_step"], seed=seed)

    def diffusion(self) -> DiffusionConfig:
        return DiffusionConfig(**self.data["diffusion"])

    def affinity(self) -> AffinityTransforms | None:
        a = self.data["affinity"]
        return None if a is None else AffinityTransforms.from_dict(a)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        data = copy.deepcopy(self.data)
        for path, value in overrides.items():
            _set(data, path, value)
        return ExperimentConfig(data, source=self.source, text=self.text)

    def sweep_points(self) -> list[dict]:
        """Override dicts for every sweep point, in declared order. ``[{}]`` if no sweeps."""
        sweeps = self.data["sweeps"]
        if not sweeps:
            return [{}]
        paths = [sw["path"] for sw in sweeps]
        return [dict(zip(paths, combo)) for combo in itertools.product(*(sw["values"] for sw in sweeps))]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)
