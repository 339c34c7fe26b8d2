from .occurrences import (Occurrence, build_occurrences, occurrences_frame, read_occurrences_csv,
                          write_occurrences_csv)
from .aggregates import (class_histogram_by_cpe, memory_histogram, memory_share, severity_histogram,
                         top_cpes, top_cwes)
from .impact import ImpactReport, estimate_sbd_impact, render_impact_table
from .corpus import CorpusReport, FirmwareReport, corpus_summary
from .exports import write_reports
