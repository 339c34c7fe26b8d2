__all__ = [
    "__title__", "__summary__", "__uri__", "__version__", "__author__",
    "__email__", "__license__", "__copyright__",
]

__title__ = "firmscan"
__summary__ = "Firmware SBOM generation and memory-safety vulnerability analysis for wireless gateways."
__uri__ = "https://github.com/firmscan/firmscan"

__version__ = "1.0.0"

__author__ = "The firmscan developers"
__email__ = "firmscan.dev@gmail.com"

__license__ = "GNU GPLv3"
__copyright__ = f"Copyright 2024-2026 {__author__}"
