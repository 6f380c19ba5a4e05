//! Monte Carlo evaluation harness.
