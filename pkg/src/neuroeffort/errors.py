"""Exception types shared across the package."""


class DataError(Exception):
    """An input file, manifest, or assembled dataset is malformed.

    Raised by ingest and by any command that consumes on-disk artifacts.
    Maps to exit code 2 in the CLI.
    """
