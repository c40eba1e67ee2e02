"""HTTP service wrapping the core analyses; the CLI is a thin client of it."""

from . import handlers, schemas

__all__ = ["handlers", "schemas"]
