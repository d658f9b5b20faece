"""cmdlens: shell-command auditing engine.

Retrieves documentation context for a command, elicits a structured
explanation from a pluggable chat backend, and maps the described behavior
onto MITRE ATT&CK techniques and tactics via embedding similarity.
"""

__version__ = "0.1.0"
