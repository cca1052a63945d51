"""Figure regeneration for utmc sweep outputs.

Reads the documented CSV/JSON schemas (correlation curves, plateau/tau
summaries, threshold reports) and renders the standard panels. No physics
is recomputed here; every number comes from the input files.
"""

__version__ = "0.1.0"

from .figures import FigureSpec, render
from .io import SchemaError, read_curves, read_summary, read_thresholds
