"""Python access to the panelsynth dialogue synthesis core."""

from ._panelsynth import (
    BackendError,
    ConfigError,
    FormatError,
    IoError,
    PanelsynthError,
    ParseError,
    ValidationError,
    __version__,
    check_file,
    difficulty_by_round,
    diversity_by_round,
    load_dialogues,
    parse_actions,
    parse_judge_output,
    render_actions,
    render_difficulty_prompt,
    run_cli,
    seed_content_id,
    simulate,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "FormatError",
    "IoError",
    "PanelsynthError",
    "ParseError",
    "ValidationError",
    "__version__",
    "check_file",
    "difficulty_by_round",
    "diversity_by_round",
    "load_dialogues",
    "parse_actions",
    "parse_judge_output",
    "render_actions",
    "render_difficulty_prompt",
    "run_cli",
    "seed_content_id",
    "simulate",
]
