"""A small multiple-dispatch language with dataflow type inference."""

__version__ = "0.1.0"
