"""qcodekit: desk-scale toolkit for instruction-tuned quantum code generation.

Pieces: corpus ingestion and stats, a LoRA-adapted reference
micro-transformer, dense retrieval with prompt assembly, seeded
temperature/top-p decoding, pluggable generation backends, and a sandboxed
pass@k benchmark harness with table and figure reports.
"""

__version__ = "0.1.0"
