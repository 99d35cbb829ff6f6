"""Float serialization shared by the CSV writers."""


def fmt(value) -> str:
    """Round-trip decimal form of a float (plain Python repr, full precision)."""
    return repr(float(value))
