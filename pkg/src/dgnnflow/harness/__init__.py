from .bench import RunManifest, ablation_sweep, bench, crosscheck, prepare, render_table
from .datasets import DatasetSpec, load_temporal_csv, synthetic_edges
from .weights_io import load_weights, save_weights
