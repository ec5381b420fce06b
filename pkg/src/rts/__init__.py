"""Learning-assisted regression test selection with human-verified ranking.

The package splits into a pure core and thin operator surfaces:

- `datamodel`: dataset schema, loading, validation
- `features`: scopable feature catalog and extraction
- `ranker`: deterministic scoring model, ranked suite, learning curve
- `verification`: randomized draws, adequacy, decision interval, cutoff
- `evaluation`: APFD, random baseline, historical backtests
- `session`: the selection workflow as a persisted, audited state machine
- `corpus`: synthetic corpora with a planted text signal
- `service` / `cli`: HTTP API and command line on top of the core
"""

__version__ = "0.1.0"
