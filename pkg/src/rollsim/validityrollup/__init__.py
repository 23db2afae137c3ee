"""The validity rollup: state diffs, messaging, the Cairo-style machine, settlement."""
