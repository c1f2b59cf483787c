"""Logic-unit knowledge base engine for multi-turn how-to QA."""

from .gateway import ChatGateway, ChatParams, HashingEmbedder, MockChatModel
from .linker import (
    TOKEN_CONTINUE,
    TOKEN_CROSS,
    TOKEN_MITIGATE,
    LinkerBranch,
    parse_linker_block,
    render_linker_text,
)
from .model import (
    LogicUnit,
    LUType,
    MetaData,
    SourceDocument,
    make_logic_unit,
    validate_lu,
)
from .session import SessionConfig, SessionEngine, SessionStatus
from .store import KnowledgeBase, build_index, retrieve

__version__ = "0.1.0"

__all__ = [
    "ChatGateway",
    "ChatParams",
    "HashingEmbedder",
    "KnowledgeBase",
    "LinkerBranch",
    "LogicUnit",
    "LUType",
    "MetaData",
    "MockChatModel",
    "SessionConfig",
    "SessionEngine",
    "SessionStatus",
    "SourceDocument",
    "TOKEN_CONTINUE",
    "TOKEN_CROSS",
    "TOKEN_MITIGATE",
    "__version__",
    "build_index",
    "make_logic_unit",
    "parse_linker_block",
    "render_linker_text",
    "retrieve",
    "validate_lu",
]
