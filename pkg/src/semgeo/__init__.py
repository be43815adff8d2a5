"""Semantic geo-partitioning and concept-influence scoring for photo geolocation."""

from semgeo.geo import AccuracyTable, GeoCoordinate, accuracy_at, great_circle_distance

__all__ = [
    "AccuracyTable",
    "GeoCoordinate",
    "accuracy_at",
    "great_circle_distance",
]

__version__ = "0.1.0"
