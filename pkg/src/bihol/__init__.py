"""Jet-based checks of biharmonicity for holomorphic maps."""

__version__ = "0.1.0"
