"""rollsim: a desk-scale simulator for optimistic and validity rollups.

Two settlement architectures over one simulated L1: an optimistic rollup
with portal deposits, sequencer batching, a derivation pipeline and an
interactive bisection dispute game, and a validity rollup with state-diff
data availability, message counters, a Cairo-style machine and a toy SNARK
settlement pipeline. Plus the probabilistic-proof primitives and the gas
cost models both are measured with.
"""

__version__ = "0.1.0"
