from .base import ModelBackend, ModelRole, RecordingBackend
from .http import HttpBackend
from .parsing import (
    parse_decomposition,
    parse_knowledge_verdict,
    parse_relevance_batch,
    parse_relevance_single,
)
from .prompts import DEFAULT_CATALOG, Exemplar, PromptCatalog, PromptSite, render_prompt
from .scripted import (
    ANY_CONTEXT,
    DIRECT_CONTEXT,
    ScriptedBackend,
    ScriptedBehavior,
    passages_fingerprint,
    placeholder_answer,
    subqa_fingerprint,
)

__all__ = [
    "ANY_CONTEXT",
    "DEFAULT_CATALOG",
    "DIRECT_CONTEXT",
    "Exemplar",
    "HttpBackend",
    "ModelBackend",
    "ModelRole",
    "PromptCatalog",
    "PromptSite",
    "RecordingBackend",
    "ScriptedBackend",
    "ScriptedBehavior",
    "parse_decomposition",
    "parse_knowledge_verdict",
    "parse_relevance_batch",
    "parse_relevance_single",
    "passages_fingerprint",
    "placeholder_answer",
    "render_prompt",
    "subqa_fingerprint",
]
