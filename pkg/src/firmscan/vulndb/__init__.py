from .records import CveRecord, CvssScore, CpeMatchRange, VersionBound
from .versions import compare_versions, version_key
from .index import FeedMeta, VulnIndex, load_index, save_index
from .feed import ingest_nvd_feed
from .matching import match_cpe
from .severity import cvss_severity
from .nvd_api import fetch_nvd_feed
