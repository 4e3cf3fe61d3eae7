from .reports import (
    ABLATION_COLUMNS,
    METRICS_COLUMNS,
    SIMILARITY_COLUMNS,
    ablation_frame,
    ablation_summary,
    metrics_frame,
    similarity_frame,
    write_ablation_csv,
    write_frame,
    write_metrics_csv,
    write_similarity_csv,
    write_task_accuracy_csv,
)
from .service import ExportService

__all__ = [
    "ABLATION_COLUMNS",
    "ExportService",
    "METRICS_COLUMNS",
    "SIMILARITY_COLUMNS",
    "ablation_frame",
    "ablation_summary",
    "metrics_frame",
    "similarity_frame",
    "write_ablation_csv",
    "write_frame",
    "write_metrics_csv",
    "write_similarity_csv",
    "write_task_accuracy_csv",
]
