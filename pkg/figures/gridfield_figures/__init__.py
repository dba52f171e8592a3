"""Figure rendering for gridfield simulation artifacts."""

from .figures import RENDERERS
from .io import InputError, read_csv, read_state, sidecar_path

__all__ = ["RENDERERS", "InputError", "read_csv", "read_state", "sidecar_path"]
