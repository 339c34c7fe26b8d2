"""firmscan

Firmware extraction, SBOM generation, CVE/CWE correlation and memory-safety
impact analysis for wireless gateway firmware.

"""
from .__about__ import (__title__, __summary__, __uri__, __version__, __author__,
                        __email__, __license__, __copyright__)
