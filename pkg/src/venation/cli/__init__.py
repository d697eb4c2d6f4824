"""Config-driven experiment runner (``python -m venation``)."""
from .config import RunConfig, canonical_json, load_config, parse_config
from .main import main
from .render import RenderOptions, render_svg
from .runner import RunOutcome, check_result, run_config
from .sweep import sweep

__all__ = [
    "RunConfig",
    "RunOutcome",
    "RenderOptions",
    "canonical_json",
    "check_result",
    "load_config",
    "main",
    "parse_config",
    "render_svg",
    "run_config",
    "sweep",
]
