from .config import (
    CONFIG_KEYS,
    ConfigValidator,
    config_from_mapping,
    config_hash,
    config_to_dict,
    config_to_json,
    parse_config,
    write_config,
)
from .datasets import (
    SYNTHETIC,
    available_datasets,
    data_dim,
    load_dataset,
    split_classes,
    write_labeled_vector_dir,
)

__all__ = [
    "CONFIG_KEYS",
    "ConfigValidator",
    "SYNTHETIC",
    "available_datasets",
    "config_from_mapping",
    "config_hash",
    "config_to_dict",
    "config_to_json",
    "data_dim",
    "load_dataset",
    "parse_config",
    "split_classes",
    "write_config",
    "write_labeled_vector_dir",
]
