"""Dataset builders: DG synthetic classification, chain-3, TPT-48 regression."""
from tasks.base_task import (
    SEED_STREAMS,
    BaseTaskBuilder,
    Dataset,
    LabeledArrays,
    Sample,
    TaskKind,
    split_seeds,
    stream_seed,
)
from tasks.dg_task import (
    Chain3TaskBuilder,
    DgTaskBuilder,
    bayes_label,
    draw_eval_samples,
    gaussian_means,
    generate_dg,
)
from tasks.tpt_task import (
    TptRecord,
    TptTaskBuilder,
    build_tpt_task,
    destandardize_targets,
    load_tpt_csv,
    write_tpt_csv,
)

__all__ = [
    "BaseTaskBuilder",
    "Chain3TaskBuilder",
    "Dataset",
    "DgTaskBuilder",
    "LabeledArrays",
    "Sample",
    "TaskKind",
    "TptRecord",
    "TptTaskBuilder",
    "bayes_label",
    "build_tpt_task",
    "destandardize_targets",
    "draw_eval_samples",
    "gaussian_means",
    "generate_dg",
    "load_tpt_csv",
    "SEED_STREAMS",
    "split_seeds",
    "stream_seed",
    "write_tpt_csv",
]
