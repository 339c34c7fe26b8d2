"""Online download of CVE data from the NVD CVE API 2.0.

Only used by ``firmscan feed fetch``; every other command runs offline.

"""
import json
from pathlib import Path
import time
from typing import Callable, Union

from loguru import logger
import requests

from firmscan import globals as project_globals

SLEEP_WITH_KEY = 0.6
SLEEP_WITHOUT_KEY = 6.0
TIMEOUT = 60


def fetch_nvd_feed(out_path: Union[str, Path], api_key: str = None, cpe_name: str = None,
                   keyword: str = None, page_size: int = project_globals.NVD_PAGE_SIZE,
                   session: requests.Session = None, url: str = project_globals.NVD_API_URL,
                   sleep: Callable[[float], None] = time.sleep) -> int:
    """Pages through the NVD CVE API and writes one ingestible document.

    Parameters
    ----------
    out_path
        Where to write the combined ``{"vulnerabilities": [...]}`` document.
    api_key
        Optional NVD API key; raises the allowed request rate.
    cpe_name
        Restrict results to one CPE name.
    keyword
        Restrict results to a keyword search.
    page_size
        Results requested per page.
    session
        HTTP session to use.
    url
        API endpoint.
    sleep
        Called between pages to respect the public rate limit.

    Returns
    -------
        Number of vulnerabilities written.

    Raises
    ------
    requests.RequestException
        On transport or HTTP errors.

    """
    session = session or requests.Session()
    headers = {'apiKey': api_key} if api_key else {}
    params = {'resultsPerPage': page_size, 'startIndex': 0}
    if cpe_name:
        params['cpeName'] = cpe_name
    if keyword:
        params['keywordSearch'] = keyword
    delay = SLEEP_WITH_KEY if api_key else SLEEP_WITHOUT_KEY

    vulnerabilities = []
    while True:
        response = session.get(url, params=params, headers=headers, timeout=TIMEOUT)
        response.raise_for_status()
        page = response.json()
        vulnerabilities.extend(page.get('vulnerabilities', []))
        total = page.get('totalResults', 0)
        logger.info(f'Fetched {len(vulnerabilities)} of {total} vulnerabilities.')
        params['startIndex'] += page.get('resultsPerPage', page_size) or page_size
        if params['startIndex'] >= total or not page.get('vulnerabilities'):
            break
        sleep(delay)

    document = {'format': 'NVD_CVE', 'version': '2.0', 'totalResults': len(vulnerabilities),
                'vulnerabilities': vulnerabilities}
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(document))
    return len(vulnerabilities)
