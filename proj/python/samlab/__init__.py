"""Sharpness-aware minimization laboratory: Python bindings."""

from ._samlab import (
    ConfigError,
    Error,
    ParseError,
    __version__,
    closed_form_epsilon,
    cosine_similarity,
    default_config,
    generate_motif_graphs,
    load_compare_report,
    load_graph_csv,
    load_manifest,
    moving_average_epsilon,
    project_perturbation,
    rho_schedule,
    run_training,
    train,
    validate_config,
    write_motif_csv,
)


def _text(config):
    return {k: (str(v).lower() if isinstance(v, bool) else str(v)) for k, v in (config or {}).items()}


def make_config(config=None, **overrides):
    """Merge a key/value mapping with keyword overrides (dots spelled as '__')."""
    merged = _text(config)
    merged.update(_text({k.replace("__", "."): v for k, v in overrides.items()}))
    return validate_config(merged)


__all__ = [
    "ConfigError",
    "Error",
    "ParseError",
    "__version__",
    "closed_form_epsilon",
    "cosine_similarity",
    "default_config",
    "generate_motif_graphs",
    "load_compare_report",
    "load_graph_csv",
    "load_manifest",
    "make_config",
    "moving_average_epsilon",
    "project_perturbation",
    "rho_schedule",
    "run_training",
    "train",
    "validate_config",
    "write_motif_csv",
]
