"""Sparse identification of glucose dynamics from insulin and carbohydrate records."""

from .differentiation import DerivativeSpec, differentiate
from .evaluation import EvalConfig, mae, persistence_baseline, rmse, rolling_evaluate
from .ingest import EventRecord, IngestReport, align, load_events
from .insulin import ActionProfile, events_to_activity, impulse_response
from .library import LibrarySpec, Term, build_matrix, enumerate_terms, term_to_string
from .pipeline import FitConfig, fit, prepare_dataset
from .series import AlignedDataset, UniformSeries, make_series, slice_series
from .simulate import Forecast, SimConfig, rhs_eval, simulate
from .stlsq import SparseModel, StlsqConfig, load_model, model_to_equations, save_model, stlsq
from .synth import SynthConfig, generate

__version__ = "0.1.0"
