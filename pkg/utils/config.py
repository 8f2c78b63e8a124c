"""
Experiment configuration.

A run is described by one JSON document; CLI flags override single fields.
Every field is validated on construction and a failure names the field.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from qcsam.circuitlib import QFM_ORDERS
from qcsam.circuitlib import TOPOLOGIES as QFM_TOPOLOGIES
from qcsam.errors import ConfigError
from qcsam.gradients import GRADIENT_METHODS
from qcsam.model import ATTENTION_MODES, SUPPORTED_GRIDS

DATASETS = ("mnist", "fashion")

# one head looks at 4 coarse patches, the second head at 49 fine ones
DEFAULT_HEAD_GRIDS = {1: ((2, 2),), 2: ((2, 2), (7, 7))}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "qcsam"
    dataset: str = "mnist"
    classes: Tuple[int, ...] = (0, 1)
    n_qubits: int = 4
    heads: int = 1
    head_grids: Tuple[Tuple[int, int], ...] = ((2, 2),)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    per_class_train: int = 512
    per_class_test: int = 128
    attention_mode: str = "complex"
    verify_circuit_path: bool = False
    qfm_layers: int = 1
    qffn_layers: int = 1
    qfm_order: str = "zz_ry"
    qfm_topology: str = "chain"
    gradient_method: str = "adjoint"
    workers: int = 1
    init_scale: float = 0.1
    weight_noise: float = 0.1
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    output_dir: str = "results"
    database_url: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(
            self, "head_grids", tuple(tuple(int(v) for v in g) for g in self.head_grids)
        )
        self.validate()

    def validate(self):
        def check(condition: bool, field_name: str, message: str):
            if not condition:
                raise ConfigError(f"{field_name}: {message}", field=field_name)

        check(self.dataset in DATASETS, "dataset", f"must be one of {DATASETS}")
        check(2 <= len(self.classes) <= 4, "classes", "needs 2 to 4 labels")
        check(len(set(self.classes)) == len(self.classes), "classes", "labels must be distinct")
        check(all(0 <= c <= 9 for c in self.classes), "classes", "labels must be digits 0-9")
        check(3 <= self.n_qubits <= 8, "n_qubits", "must be between 3 and 8")
        check(self.heads in (1, 2), "heads", "must be 1 or 2")
        check(len(self.head_grids) == self.heads, "head_grids", "needs one grid per head")
        check(
            all(g in SUPPORTED_GRIDS for g in self.head_grids),
            "head_grids",
            f"grids must be among {SUPPORTED_GRIDS}",
        )
        check(self.epochs >= 0, "epochs", "must be non-negative")
        check(self.batch_size >= 1, "batch_size", "must be positive")
        check(self.learning_rate > 0, "learning_rate", "must be positive")
        check(0 <= self.beta1 < 1, "beta1", "must lie in [0, 1)")
        check(0 <= self.beta2 < 1, "beta2", "must lie in [0, 1)")
        check(self.epsilon > 0, "epsilon", "must be positive")
        check(len(self.seeds) >= 1, "seeds", "needs at least one seed")
        check(self.per_class_train >= 1, "per_class_train", "must be positive")
        check(self.per_class_test >= 1, "per_class_test", "must be positive")
        check(
            self.attention_mode in ATTENTION_MODES,
            "attention_mode",
            f"must be one of {ATTENTION_MODES}",
        )
        check(self.qfm_layers >= 1, "qfm_layers", "must be positive")
        check(self.qffn_layers >= 1, "qffn_layers", "must be positive")
        check(self.qfm_order in QFM_ORDERS, "qfm_order", f"must be one of {QFM_ORDERS}")
        check(
            self.qfm_topology in QFM_TOPOLOGIES,
            "qfm_topology",
            f"must be one of {QFM_TOPOLOGIES}",
        )
        check(
            self.gradient_method in GRADIENT_METHODS,
            "gradient_method",
            f"must be one of {GRADIENT_METHODS}",
        )
        check(self.workers >= 1, "workers", "must be positive")
        check(self.init_scale >= 0, "init_scale", "must be non-negative")
        check(self.weight_noise >= 0, "weight_noise", "must be non-negative")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["classes"] = list(self.classes)
        data["seeds"] = list(self.seeds)
        data["head_grids"] = [list(g) for g in self.head_grids]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}", field=unknown[0])
        data = dict(data)
        if "head_grids" not in data and "heads" in data:
            grids = DEFAULT_HEAD_GRIDS.get(data["heads"])
            if grids is None:
                raise ConfigError("heads: must be 1 or 2", field="heads")
            data["head_grids"] = grids
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid config value: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path: Union[str, Path]):
        Path(path).write_text(self.to_json() + "\n")

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with the non-None overrides applied (and re-validated)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if "heads" in changes and "head_grids" not in changes:
            grids = DEFAULT_HEAD_GRIDS.get(changes["heads"])
            if grids is None:
                raise ConfigError("heads: must be 1 or 2", field="heads")
            changes["head_grids"] = grids
        unknown = sorted(set(changes) - {f.name for f in dataclasses.fields(self)})
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}", field=unknown[0])
        return dataclasses.replace(self, **changes)
