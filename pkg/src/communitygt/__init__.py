"""Group testing over populations with overlapping community structure."""

__version__ = "0.1.0"
