"""File formats, dataset parsing and the reverse-geocoding client."""
