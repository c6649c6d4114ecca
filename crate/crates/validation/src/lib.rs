//! Holds the acceptance checks under `tests/`; there is no library code.
