//! CLI entry points.
