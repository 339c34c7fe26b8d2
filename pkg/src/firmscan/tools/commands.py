"""Main application functions behind each ``firmscan`` command.

.. admonition::

   Logging in this module should typically be done at the ``info`` level.
   Use your best judgement.

"""
import json
from pathlib import Path
from typing import Sequence

import click
from loguru import logger

from firmscan import globals as project_globals
from firmscan.analytics import (corpus_summary, estimate_sbd_impact, memory_share, read_occurrences_csv,
                                render_impact_table, write_occurrences_csv, write_reports)
from firmscan.analytics.exports import dump_json, write_json
from firmscan.tools.app_logging import add_logging_sink
from firmscan.tools.config import RunConfig
from firmscan.tools import pipeline
from firmscan.vulndb import fetch_nvd_feed, ingest_nvd_feed, load_index, save_index


def ingest_feeds(config: RunConfig, feeds: Sequence[str]) -> int:
    documents = [Path(feed).read_bytes() for feed in feeds]
    ingested_at = project_globals.REPRODUCIBLE_TIMESTAMP if config.reproducible else None
    index = ingest_nvd_feed(documents, source_label=','.join(Path(f).name for f in feeds),
                            ingested_at=ingested_at)
    if index.duplicate_count:
        logger.warning(f'{index.duplicate_count} repeated CVE id(s); the last occurrence of each was kept.')
    save_index(index, config.index_path)
    logger.info(f'Wrote index to {config.index_path}.')
    click.echo(f'ingested {len(index)} records', err=True)
    return len(index)


def fetch_feed(config: RunConfig, out_path: str, cpe_name: str, keyword: str) -> int:
    config.require_online('feed fetch')
    count = fetch_nvd_feed(out_path, api_key=config.nvd_api_key, cpe_name=cpe_name, keyword=keyword)
    click.echo(f'fetched {count} records into {out_path}', err=True)
    return count


def scan_image(config: RunConfig, image: str) -> Path:
    result = pipeline.scan_input(image, config.cache_dir)
    sbom_path, sbom = pipeline.write_scan(result, config.out_dir, config.reproducible)
    logger.info(f'Wrote {sbom_path}.')
    if config.stdout:
        click.echo(sbom, nl=False)
    return sbom_path


def analyze_path(config: RunConfig, path: str) -> Path:
    index = load_index(config.index_path)
    classifier = pipeline.build_classifier(config)
    report = pipeline.analyze_input(path, index, classifier, config.cache_dir)

    occurrences_path = config.out_dir / project_globals.OCCURRENCES_FILE
    write_occurrences_csv(report.occurrences, occurrences_path)
    summary = report.to_dict()
    summary['memory_share'] = memory_share(report.occurrences) if report.occurrences else None
    summary['classification_sources'] = dict(sorted(classifier.counts.items()))
    write_json(summary, config.out_dir / project_globals.REPORT_FILE)
    logger.info(f'Wrote {occurrences_path}.')
    if config.stdout:
        click.echo(occurrences_path.read_text(encoding='utf-8'), nl=False)
    return occurrences_path


def analyze_corpus(config: RunConfig, directory: str) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    sink = add_logging_sink(config.out_dir / 'logs' / 'corpus.log', verbose=1, serialize=True)
    try:
        index = load_index(config.index_path)
        reports, failures = pipeline.run_corpus(directory, index, config)
    finally:
        logger.remove(sink)

    corpus = corpus_summary(reports, failures)
    occurrences = sorted(o for r in reports for o in r.occurrences)
    impact = estimate_sbd_impact(occurrences, firmware_count=corpus.firmware_count) if occurrences else None
    if impact is None:
        logger.warning('The corpus has no occurrences; skipping the impact report.')
    write_reports(config.out_dir, corpus, impact, occurrences)
    for name, error in corpus.failed_inputs:
        logger.warning(f'Failed input {name}: {error}')
    if config.stdout:
        click.echo(dump_json(corpus.to_dict()), nl=False)
    return config.out_dir / project_globals.CORPUS_FILE


def report_impact(config: RunConfig, occurrences_csv: str, protection_coverage: float) -> Path:
    occurrences = read_occurrences_csv(occurrences_csv)
    impact = estimate_sbd_impact(occurrences, protection_coverage=protection_coverage)
    click.echo(render_impact_table(impact), err=True)
    impact_path = config.out_dir / project_globals.IMPACT_FILE
    write_json(impact.to_dict(), impact_path)
    if config.stdout:
        click.echo(json.dumps(impact.to_dict(), indent=2, sort_keys=True))
    return impact_path
