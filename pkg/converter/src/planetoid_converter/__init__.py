"""One-shot converters from legacy citation-network files to the portable
dataset directory format (meta.json / edges.csv / features.bin / labels.csv /
splits.json)."""

from .convert import (ConversionError, EXPECTED_COUNTS, convert,
                      convert_cora_ml)

__all__ = ["ConversionError", "EXPECTED_COUNTS", "convert",
           "convert_cora_ml"]
__version__ = "0.1.0"
