"""Code comment generation with semantic and syntactic code embeddings."""

from ._lamner import (
    LamnerError,
    StageError,
    __version__,
    bleu,
    cider,
    code_tokens,
    label_names,
    lex,
    load_table,
    meteor,
    preset_names,
    report,
    rouge_l,
    run_pipeline,
    self_test,
    show_config,
    synthesize,
    tokenize_comment,
)

__all__ = [
    "LamnerError",
    "StageError",
    "__version__",
    "bleu",
    "cider",
    "code_tokens",
    "label_names",
    "lex",
    "load_table",
    "meteor",
    "preset_names",
    "report",
    "rouge_l",
    "run_pipeline",
    "self_test",
    "show_config",
    "synthesize",
    "tokenize_comment",
]
