"""ssmi-lab - memory modules for a frozen toy vision-language model.

Trains small linear state space modules inserted into every block of a
frozen transformer, conditioned on visual features, and evaluates them on
synthetic captioning data.

The package consists of:
- A reverse-mode autodiff core over numpy arrays
- The state space layer and the toy backbone it plugs into
- Two-stage training and the evaluation protocols
- CLI commands and a TUI for browsing reports
"""

__version__ = "0.1.0"
