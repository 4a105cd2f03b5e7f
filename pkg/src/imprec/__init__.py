"""imprec: controlled-missingness benchmark for tabular recommendation data.

Inject MCAR gaps with a recoverable ledger, fill them with statistical or
generative imputers, train a small neural recommender on the result, and
compare the downstream damage per strategy.
"""

from .backends import GenerativeBackend, LocalBackend, RemoteBackend
from .genimpute import (
    GenerativeImputer,
    ImputationAudit,
    PromptPair,
    PromptTemplate,
    UNPARSEABLE,
    build_finetune_pairs,
    generative_impute,
    parse_completion,
    parse_prompt,
    serialize_row_to_prompt,
)
from .harness import (
    ExperimentConfig,
    ImputerSpec,
    RunResult,
    Seeds,
    emit_report,
    load_config,
    run_experiment,
)
from .imputers import (
    CaseWiseDeletion,
    Imputer,
    IterativeConfig,
    IterativeImputer,
    KnnConfig,
    KnnImputer,
    MeanImputer,
    ZeroImputer,
    casewise_delete,
    iterative_impute,
    knn_impute,
    make_imputer,
    mean_impute,
    zero_impute,
)
from .metrics import (
    BinaryConfusion,
    RankedEval,
    ndcg_at_k,
    precision_recall_f1,
    recall_at_k,
    regression_errors,
)
from .missingness import (
    MaskLedger,
    MaskedCellScore,
    inject_mcar,
    masked_cell_score,
    restore,
)
from .recsys import (
    RankingProtocol,
    RecModel,
    RecModelConfig,
    Task,
    grad_check,
    load_checkpoint,
    per_user_holdout,
    predict,
    rank_topk,
    save_checkpoint,
    train,
)
from .rng import make_rng
from .tabular import (
    CellRef,
    ColumnKind,
    ColumnSchema,
    SplitSpec,
    Table,
    TableSchema,
    concat_rows,
    load_csv,
    load_schema,
    save_schema,
    split_complete_incomplete,
    split_train_test_valid,
    write_csv,
)

__version__ = "0.1.0"
