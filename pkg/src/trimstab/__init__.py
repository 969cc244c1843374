"""Stability Selection, Trimmed Stability Selection and their breakdown probabilities."""
from .metrics import RunScore, Summary, score, summarize
from .resample import ResampleIndex, ResamplePlan, contaminated_count, draw, draw_all
from .selector import L1Selector, SelectionResult, SelectorConfig, fit_l1_path, in_sample_loss
from .stability import (
    EnsembleRun,
    FrequencyVector,
    Rank,
    StabilitySelection,
    Threshold,
    TrimmedStabilitySelection,
    aggregate_frequencies,
    run_stability_selection,
    stable_set,
    trim_set,
    trimmed_frequencies,
)
from .synthdata import (
    ContaminationSpec,
    Dataset,
    Scheme,
    contaminate,
    contaminated_cell_fraction,
    count_contaminated_cells,
    generate_dataset,
    load_dataset,
    save_dataset,
)

__version__ = "0.1.0"
