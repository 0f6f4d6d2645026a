"""Synthetic grid-drawing responses, image ingestion and sample splitting."""

from ..sampling import stratified_split
from .dataset import (
    DEFAULT_MIX,
    MANIFEST_COLUMNS,
    GeneratorConfig,
    ResponseRecord,
    generate_dataset,
    generate_in_memory,
    generate_records,
    load_dataset,
    read_manifest,
    split_records,
    write_manifest,
)
from .measure import back_wall_dims, measure_score
from .netpbm import encode_pgm, parse_netpbm, read_netpbm, write_pgm
from .preprocess import preprocess
from .render import Style, grid_template, render_response

__all__ = [
    "DEFAULT_MIX", "MANIFEST_COLUMNS", "GeneratorConfig", "ResponseRecord", "Style",
    "back_wall_dims", "encode_pgm", "generate_dataset", "generate_in_memory", "generate_records",
    "grid_template", "load_dataset", "measure_score", "parse_netpbm", "preprocess", "read_manifest",
    "read_netpbm", "render_response", "split_records", "stratified_split", "write_manifest", "write_pgm",
]
