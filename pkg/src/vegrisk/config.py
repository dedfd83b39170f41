"""Pipeline configuration: one TOML document; command-line flags win.

Every stochastic stage derives its stream from the single root seed, so
the whole pipeline is reproducible from one file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ValidationError
from .features import DEFAULT_WIND_BIN_EDGES, WIND_CONVENTIONS
from .ingest import DEFAULT_VEGETATION_CAUSES
from .model import TrainConfig
from .resample import ResampleConfig
from .synth import SynthConfig


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    output_dir: Path = Path("out")
    weather_path: Path | None = None  # default: <output_dir>/weather.csv
    outages_path: Path | None = None
    evi_path: Path | None = None
    start: date | None = None  # default: span of the weather file
    end: date | None = None
    vegetation_causes: tuple[str, ...] = DEFAULT_VEGETATION_CAUSES
    wind_bin_edges: tuple[float, ...] = DEFAULT_WIND_BIN_EDGES
    evi_bin_count: int = 4
    wind_convention: str = "raw"
    train_fraction: float = 0.8
    threshold: float = 0.5
    match_tolerance: float = 0.05
    min_cell_count: int = 1
    render_figures: bool = True
    synth: SynthConfig = field(default_factory=SynthConfig)
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.wind_convention not in WIND_CONVENTIONS:
            raise ValidationError(f"wind_convention must be one of {WIND_CONVENTIONS}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.match_tolerance < 0:
            raise ValidationError(f"match_tolerance must be >= 0, got {self.match_tolerance}")
        if self.min_cell_count < 1:
            raise ValidationError(f"min_cell_count must be >= 1, got {self.min_cell_count}")
        if self.evi_bin_count < 1:
            raise ValidationError(f"evi_bin_count must be >= 1, got {self.evi_bin_count}")
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValidationError("range start is after range end")

    @property
    def weather_file(self) -> Path:
        return self.weather_path or self.output_dir / "weather.csv"

    @property
    def outages_file(self) -> Path:
        return self.outages_path or self.output_dir / "outages.csv"

    @property
    def evi_file(self) -> Path:
        return self.evi_path or self.output_dir / "evi.csv"

    @property
    def model_file(self) -> Path:
        return self.output_dir / "model.json"

    @property
    def daily_file(self) -> Path:
        return self.output_dir / "daily.csv"


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown configuration key {unknown[0]!r} in {where}")


def _as_date(value, where: str) -> date:
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    raise ValidationError(f"{where} must be a date, got {value!r}")


def load_config(path=None, seed: int | None = None, output_dir=None) -> PipelineConfig:
    """Load a TOML config file; ``seed`` and ``output_dir`` override it.

    With no path, the built-in defaults apply. Section seeds are not
    configurable: the root seed feeds every stage through named
    substreams.
    """
    doc: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                doc = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: invalid TOML: {exc}") from None

    _check_keys(doc, ("seed", "output_dir", "train_fraction", "paths", "range", "ingest", "features", "synth", "resample", "train", "evaluate"), "top level")

    root_seed = int(doc.get("seed", 0))
    if seed is not None:
        root_seed = int(seed)
    out_dir = Path(output_dir) if output_dir is not None else Path(doc.get("output_dir", "out"))

    paths = doc.get("paths", {})
    _check_keys(paths, ("weather", "outages", "evi"), "[paths]")
    span = doc.get("range", {})
    _check_keys(span, ("start", "end"), "[range]")
    ing = doc.get("ingest", {})
    _check_keys(ing, ("vegetation_causes",), "[ingest]")
    feat = doc.get("features", {})
    _check_keys(feat, ("wind_bin_edges", "evi_bin_count", "wind_convention"), "[features]")
    ev = doc.get("evaluate", {})
    _check_keys(ev, ("threshold", "match_tolerance", "min_cell_count", "render_figures"), "[evaluate]")

    causes = tuple(str(c) for c in ing.get("vegetation_causes", DEFAULT_VEGETATION_CAUSES))

    syn = dict(doc.get("synth", {}))
    _check_keys(
        syn,
        ("years", "start_year", "target_outages", "base_rate", "planted_coefficients",
         "missing_fraction", "evi_gap_days", "extra_cause_days"),
        "[synth]",
    )
    if "planted_coefficients" in syn:
        syn["planted_coefficients"] = {str(k): float(v) for k, v in syn["planted_coefficients"].items()}
    synth_config = SynthConfig(seed=root_seed, vegetation_causes=causes, **syn)

    res = dict(doc.get("resample", {}))
    _check_keys(res, ("smote_k", "enn_k", "target_ratio", "enn_both_classes", "enabled"), "[resample]")
    resample_config = ResampleConfig(seed=root_seed, **res)

    trn = dict(doc.get("train", {}))
    _check_keys(trn, ("learning_rate", "max_iters", "tolerance", "l2"), "[train]")
    train_config = TrainConfig(seed=root_seed, **trn)

    try:
        return PipelineConfig(
            seed=root_seed,
            output_dir=out_dir,
            weather_path=Path(paths["weather"]) if "weather" in paths else None,
            outages_path=Path(paths["outages"]) if "outages" in paths else None,
            evi_path=Path(paths["evi"]) if "evi" in paths else None,
            start=_as_date(span["start"], "range.start") if "start" in span else None,
            end=_as_date(span["end"], "range.end") if "end" in span else None,
            vegetation_causes=causes,
            wind_bin_edges=tuple(float(e) for e in feat.get("wind_bin_edges", DEFAULT_WIND_BIN_EDGES)),
            evi_bin_count=int(feat.get("evi_bin_count", 4)),
            wind_convention=str(feat.get("wind_convention", "raw")),
            train_fraction=float(doc.get("train_fraction", 0.8)),
            threshold=float(ev.get("threshold", 0.5)),
            match_tolerance=float(ev.get("match_tolerance", 0.05)),
            min_cell_count=int(ev.get("min_cell_count", 1)),
            render_figures=bool(ev.get("render_figures", True)),
            synth=synth_config,
            resample=resample_config,
            train=train_config,
        )
    except TypeError as exc:
        raise ValidationError(f"invalid configuration: {exc}") from None


def with_overrides(config: PipelineConfig, **changes) -> PipelineConfig:
    return replace(config, **changes)
