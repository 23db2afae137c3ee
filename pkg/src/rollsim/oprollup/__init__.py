"""The optimistic rollup: deposits, batching, derivation, withdrawals, disputes."""
