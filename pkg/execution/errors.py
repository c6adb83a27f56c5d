"""
Common base for every error raised by the flow-category tools.

Each module defines its own exception classes next to the code that raises
them; they all derive from FlowToolsError so the CLI can map a failure to a
stable exit code.
"""


class FlowToolsError(Exception):
    """Base class for flow-category tool errors."""

    exit_code = 5
