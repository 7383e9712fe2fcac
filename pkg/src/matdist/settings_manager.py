import copy
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .distributions import GridSpec, Point, axis_values
from .errors import ConfigError
from .foliation import LeafVariant
from .isomorph import IsomorphismConfig
from .kernel import SamplingConfig, Variant
from .law import ConstitutiveLaw, LawFactory

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "csv")
JET_MODES = ("auto", "dual", "fd")

DEFAULT_SETTINGS: Dict[str, Any] = {
    "law": {
        "name": "homog_pair",
        "params": {},
    },
    "grid": {
        "t_min": 0.0,
        "t_max": 1.0,
        "t_count": 3,
        "x1_min": -1.0,
        "x1_max": 1.0,
        "x1_count": 3,
        "x2": 0.0,
        "x3": 0.0,
    },
    "sampling": {
        "n_f": 40,
        "n_validation": 40,
        "seed": 7,
        "spread": 0.75,
        "tau_rank": 1e-8,
        "tau_accept": 1e-6,
        "jet_mode": "auto",
    },
    "isomorphism": {
        "tau_iso": 1e-6,
        "n_starts": 8,
        "max_iter": 200,
        "probe": False,
        "symmetry": False,
    },
    "trace": {
        "variant": "StateT",
        "steps": 10,
        "step": 1e-2,
        "freeze_time_check": False,
    },
    "remodel": {
        "particle": [0.0, 0.0, 0.0],
        "tau_mass": 1e-6,
        "tau_tr": 1e-8,
        "check_membership": False,
    },
    "output": {
        "dir": "out",
        "formats": ["json", "csv"],
    },
}


def _deep_merge_dicts(d1: Dict, d2: Dict) -> Dict:
    """Recursively merges d2 into d1. Modifies d1 in place."""
    for key, value in d2.items():
        if key in d1 and isinstance(d1[key], dict) and isinstance(value, dict):
            _deep_merge_dicts(d1[key], value)
        else:
            d1[key] = value
    return d1


def _read_file(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    if suffix == ".toml":
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            # message already ends with "(at line N, column M)"
            raise ConfigError(f"{path}: {e}") from e
    if suffix == ".json":
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return loaded
    raise ConfigError(f"{path}: unsupported config format {suffix!r} (use .toml or .json)")


def _is_vector(value: Any, size: int) -> bool:
    return (isinstance(value, list) and len(value) == size
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value))


class SettingsManager:
    """Run configuration: built-in defaults deep-merged with a TOML/JSON file and CLI overrides."""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        """Load and validate a run configuration.

        Args:
            config_path: Path to a .toml or .json file. If None, defaults only.
            overrides: Nested dict merged last (e.g. {"sampling": {"seed": 3}}).
        """
        self.config_path = Path(config_path) if config_path is not None else None
        self.base_dir = self.config_path.parent if self.config_path is not None else Path.cwd()
        self.settings = self._load_settings(overrides or {})
        self.validate()

    def _load_settings(self, overrides: Dict[str, Any]) -> Dict[str, Any]:
        settings = copy.deepcopy(DEFAULT_SETTINGS)
        if self.config_path is not None:
            _deep_merge_dicts(settings, _read_file(self.config_path))
        return _deep_merge_dicts(settings, copy.deepcopy(overrides))

    def get_setting(self, key_path: str, default: Any = None) -> Any:
        """Get a specific setting using dot notation.

        Args:
            key_path: The setting key in dot notation (e.g., "sampling.n_f")
            default: The default value to return if the key is not found.

        Returns:
            The setting value or the default.
        """
        try:
            value = self.settings
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def _number(self, key_path: str, kind=float) -> Any:
        value = self.get_setting(key_path)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key_path} must be a number, got {value!r}")
        if kind is int and float(value) != int(value):
            raise ConfigError(f"{key_path} must be an integer, got {value!r}")
        return kind(value)

    def validate(self) -> None:
        """Raise ConfigError on any inconsistent setting."""
        for key in ("sampling.tau_rank", "sampling.tau_accept", "sampling.spread", "isomorphism.tau_iso",
                    "remodel.tau_mass", "remodel.tau_tr", "trace.step"):
            if not self._number(key) > 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("sampling.n_f", "grid.t_count", "grid.x1_count", "isomorphism.n_starts",
                    "isomorphism.max_iter"):
            if self._number(key, int) < 1:
                raise ConfigError(f"{key} must be at least 1")
        for key in ("sampling.n_validation", "trace.steps"):
            if self._number(key, int) < 0:
                raise ConfigError(f"{key} must not be negative")
        self._number("sampling.seed", int)

        for axis in ("t", "x1", "x2", "x3"):
            lo, hi = self.get_setting(f"grid.{axis}_min"), self.get_setting(f"grid.{axis}_max")
            if lo is not None and hi is not None and lo > hi:
                raise ConfigError(f"grid.{axis}_min must not exceed grid.{axis}_max")

        name = self.get_setting("law.name")
        if name not in LawFactory.available_laws():
            raise ConfigError(f"unknown law {name!r}; available: {', '.join(LawFactory.available_laws())}")
        law = self.law()
        n_f = self._number("sampling.n_f", int)
        if law.output_dim * n_f < Variant.FULL.unknown_dim:
            raise ConfigError(f"sampling.n_f = {n_f} gives {law.output_dim * n_f} rows for {law.name}; "
                              f"at least {Variant.FULL.unknown_dim} are needed")
        if self.get_setting("sampling.jet_mode") not in JET_MODES:
            raise ConfigError(f"sampling.jet_mode must be one of {', '.join(JET_MODES)}")
        if self.get_setting("trace.variant") not in [v.value for v in LeafVariant]:
            raise ConfigError(f"trace.variant must be one of {', '.join(v.value for v in LeafVariant)}")
        directions = self.get_setting("trace.directions")
        if directions is not None:
            if not isinstance(directions, list) or not all(_is_vector(d, 4) for d in directions):
                raise ConfigError("trace.directions must be a list of 4-vectors [t, x1, x2, x3]")
        formats = self.get_setting("output.formats")
        if not isinstance(formats, list) or not formats or not set(formats) <= set(OUTPUT_FORMATS):
            raise ConfigError(f"output.formats must be a nonempty subset of {list(OUTPUT_FORMATS)}")

    # --- typed views ---------------------------------------------------

    def law(self) -> ConstitutiveLaw:
        return LawFactory.create_law(self.get_setting("law.name"), self.get_setting("law.params", {}))

    def sampling_config(self) -> SamplingConfig:
        return SamplingConfig(
            n_f=self._number("sampling.n_f", int),
            n_validation=self._number("sampling.n_validation", int),
            seed=self._number("sampling.seed", int),
            spread=self._number("sampling.spread"),
            tau_rank=self._number("sampling.tau_rank"),
            tau_accept=self._number("sampling.tau_accept"),
            jet_mode=self.get_setting("sampling.jet_mode"),
        )

    def isomorphism_config(self) -> IsomorphismConfig:
        return IsomorphismConfig(
            tau_iso=self._number("isomorphism.tau_iso"),
            n_starts=self._number("isomorphism.n_starts", int),
            max_iter=self._number("isomorphism.max_iter", int),
        )

    def _axis(self, axis: str, pinned: Optional[float] = None) -> Tuple[float, ...]:
        count = self.get_setting(f"grid.{axis}_count")
        if count is None:
            return (float(pinned if pinned is not None else 0.0),)
        lo, hi = self._number(f"grid.{axis}_min"), self._number(f"grid.{axis}_max")
        count = self._number(f"grid.{axis}_count", int)
        if count < 1:
            raise ConfigError(f"grid.{axis}_count must be at least 1")
        return axis_values(lo, hi, count)

    def grid_spec(self) -> GridSpec:
        """(t, x¹) grid with x², x³ pinned unless their own ranges are given."""
        return GridSpec(
            t_values=self._axis("t"),
            x1_values=self._axis("x1"),
            x2_values=self._axis("x2", self.get_setting("grid.x2", 0.0)),
            x3_values=self._axis("x3", self.get_setting("grid.x3", 0.0)),
        )

    def point(self, key_path: str) -> Optional[Point]:
        """A point table {t = …, x = [x1, x2, x3]} or None when absent."""
        value = self.get_setting(key_path)
        if value is None:
            return None
        try:
            x = tuple(float(v) for v in value["x"])
            if len(x) != 3:
                raise ValueError("x needs three coordinates")
            return (float(value["t"]), x)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{key_path} must be a table with t and x = [x1, x2, x3]: {e}") from e

    def resolve_path(self, key_path: str) -> Optional[Path]:
        """File setting resolved against the config file's directory."""
        value = self.get_setting(key_path)
        if value is None:
            return None
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    def output_dir(self) -> Path:
        return Path(self.get_setting("output.dir"))

    def formats(self) -> List[str]:
        return list(self.get_setting("output.formats"))

    def print_configuration(self) -> None:
        """Print current configuration in a readable format."""
        print("🔧 Current Configuration:")
        print("=" * 50)
        print(f"📋 Law: {self.get_setting('law.name')} {self.get_setting('law.params') or ''}")
        grid = self.grid_spec()
        print(f"   Grid: {len(grid.t_values)} t × {len(grid.x1_values)} x1 × "
              f"{len(grid.x2_values)} x2 × {len(grid.x3_values)} x3")
        for section in ("sampling", "isomorphism", "trace", "remodel", "output"):
            print(f"   [{section}]")
            for key, value in sorted(self.settings.get(section, {}).items()):
                print(f"      {key}: {value}")
        print()
