"""predexport: batched classifier inference into divshift file formats."""

from .export import (
    ExportJob,
    export,
    fragment_to_json,
    load_dataset,
    resolve_model,
    run_model,
    softmax,
)
from .formats import ExportError, write_label_file, write_prediction_file

__version__ = "0.1.0"
