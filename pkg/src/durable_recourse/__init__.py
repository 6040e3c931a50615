"""Time-aware algorithmic recourse under competition."""
