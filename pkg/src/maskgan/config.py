"""Flat ``key=value`` run configuration.

One setting per line, ``#`` starts a comment, later lines override earlier
ones and command-line ``--key=value`` overrides override the file. Keys are
the :class:`~maskgan.training.TrainConfig` fields (with ``lambda`` for the
reconstruction weight), the dataset keys below, and ``label.<Structure>``
entries for the label map. Unset keys take the full-scale defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .data.preprocess import STRUCTURES, LabelMap
from .errors import ConfigError
from .training.config import TrainConfig

# config key -> TrainConfig field
TRAIN_KEYS = {("lambda" if f.name == "lam" else f.name): f.name for f in fields(TrainConfig)}
DATASETS = ("phantom", "phantom_dir", "nifti")


@dataclass(frozen=True)
class DataConfig:
    dataset: str = "phantom"
    data_dir: str = ""
    phantom_count: int = 200
    phantom_seed: int = 0
    nifti_pairs: str = ""
    condition: str = "WH"
    exclude_empty: bool = True

    def pairs(self) -> list[tuple[str, str]]:
        """``image:label`` entries separated by commas."""
        out = []
        for item in filter(None, (s.strip() for s in self.nifti_pairs.split(","))):
            image, sep, label = item.partition(":")
            if not sep or not image or not label:
                raise ConfigError(f"nifti_pairs entry {item!r} is not 'image:label'")
            out.append((image, label))
        return out


DATA_KEYS = {f.name: f.name for f in fields(DataConfig)}


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    data: DataConfig
    labels: LabelMap | None

    def echo(self) -> str:
        """Every effective key exactly once, defaults included."""
        lines = []
        for key, name in TRAIN_KEYS.items():
            lines.append(f"{key}={_show(getattr(self.train, name))}")
        for key in DATA_KEYS:
            lines.append(f"{key}={_show(getattr(self.data, key))}")
        if self.labels is not None:
            lines.extend(f"label.{k}={v}" for k, v in self.labels.items())
        return "\n".join(lines) + "\n"


def _show(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(e) for e in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(raw: str, default, key: str, line):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {key}={raw!r}", line=line) from None


def parse_lines(text: str, origin: str = "") -> dict:
    """``key -> (value, line number)``; later occurrences win."""
    settings = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        settings[key] = (value.strip(), lineno)
    return settings


def parse_config(text: str = "", overrides=()) -> RunConfig:
    """Resolve ``text`` plus ``overrides`` (``"key=value"`` strings) against the defaults.

    Errors carry the offending line; override errors have no line number.
    """
    settings = parse_lines(text)
    for item in overrides:
        key, sep, value = item.lstrip("-").partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        settings[key.strip()] = (value.strip(), None)

    train_defaults = TrainConfig()
    data_defaults = DataConfig()
    train_kw, data_kw, labels = {}, {}, {}
    line_of = {}
    for key, (raw, line) in settings.items():
        line_of[key] = line
        if key in TRAIN_KEYS:
            name = TRAIN_KEYS[key]
            train_kw[name] = _coerce(raw, getattr(train_defaults, name), key, line)
        elif key in DATA_KEYS:
            data_kw[key] = _coerce(raw, getattr(data_defaults, key), key, line)
        elif key.startswith("label.") and key[6:] in STRUCTURES:
            labels[key[6:]] = int(_coerce(raw, 0, key, line))
        else:
            raise ConfigError(f"unknown key {key!r}", line=line)

    def build(cls, kw, keys):
        try:
            return cls(**kw)
        except ConfigError as exc:
            # attribute the error to the last-set key it mentions, if any
            culprit = next((k for k in reversed(list(keys)) if k in str(exc)), None)
            if exc.line is None and culprit is not None and line_of.get(culprit):
                raise ConfigError(str(exc), line=line_of[culprit]) from None
            raise

    train = build(TrainConfig, train_kw, [k for k in settings if k in TRAIN_KEYS])
    data = DataConfig(**data_kw)
    if data.dataset not in DATASETS:
        raise ConfigError(f"dataset must be one of {DATASETS}, got {data.dataset!r}",
                          line=line_of.get("dataset"))
    if data.dataset == "phantom_dir" and not data.data_dir:
        raise ConfigError("dataset=phantom_dir needs data_dir", line=line_of.get("dataset"))
    label_map = None
    if labels:
        try:
            label_map = LabelMap(labels)
        except ConfigError as exc:
            last = max((line_of[f"label.{k}"] or 0) for k in labels)
            raise ConfigError(str(exc), line=last or None) from None
    if data.dataset == "nifti":
        if not data.pairs():
            raise ConfigError("dataset=nifti needs nifti_pairs",
                              line=line_of.get("nifti_pairs", line_of.get("dataset")))
        if label_map is None:
            raise ConfigError("dataset=nifti needs label.<Structure> entries for all of "
                              f"{', '.join(STRUCTURES)}", line=line_of.get("dataset"))
    return RunConfig(train, data, label_map)
