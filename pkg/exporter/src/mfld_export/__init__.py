"""Activation exporter: hooks torch models and writes mfld activation stores."""

__version__ = "0.1.0"

from .writer import write_layer_file, write_manifest
from .manifest import IncompleteManifest, build_manifest
from .hooks import ExportSpec, ExampleSpec, export_activations
