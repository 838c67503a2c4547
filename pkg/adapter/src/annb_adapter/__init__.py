"""Reference adapter for the annb-proto/1 line protocol.

Wraps an exact linear-scan nearest-neighbor search so that any harness
speaking the protocol has a known-correct external algorithm to talk to.
Standard library only.
"""

__version__ = "0.1.0"
