"""Compressive scene-graph localization: semantic graphs, a from-scratch
graph-convolutional place classifier, reciprocal-rank particle filtering,
and learned viewpoint planning, evaluated on synthetic desk-scale worlds."""

__version__ = "0.1.0"

# Schema versions of every serialized format (manifest, params, q-store,
# report CSVs). Bump on any incompatible change.
MANIFEST_SCHEMA_VERSION = 1
PARAMS_SCHEMA_VERSION = 1
QSTORE_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
