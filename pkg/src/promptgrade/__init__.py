"""Prompting-strategy grid for joint essay scoring and feedback generation."""

from .corpus import (
    Corpus,
    CorpusError,
    Essay,
    EssaySet,
    Exemplar,
    FoldSplit,
    RubricLevel,
    ScoreRange,
    assign_folds,
    load_essays,
    load_fixture_corpus,
    load_set_config,
    load_set_configs,
)
from .extraction import (
    FeedbackText,
    ScoreExtraction,
    build_reprompt,
    extract_score,
    resolve_score,
    split_feedback,
)
from .experiment import (
    ExperimentError,
    ExperimentPlan,
    RunRecord,
    StrategyKey,
    read_records,
    run_grid,
    select_best_on_dev,
    write_records,
)
from .judge import HelpfulnessJudgment, JudgmentError, aggregate_helpfulness, build_judge_prompt, judge
from .llm_client import (
    ConfigurationError,
    ContextOverflowError,
    EndpointConfig,
    EndpointError,
    GenerationRequest,
    GenerationResponse,
    ResponseCache,
    complete,
    complete_cached,
)
from .metrics import (
    MetricError,
    RatingVector,
    ReliabilityMatrix,
    UndefinedCorrelationError,
    krippendorff_alpha_interval,
    mean_std,
    pearson,
    qwk,
)
from .prompting import (
    AssembledPrompt,
    AssemblyError,
    DEFAULT_PROMPT_BUDGET,
    assemble,
    format_exemplar,
    render_instruction,
    render_pattern,
    render_rubric,
    render_scoring_range,
    select_few_shot,
    select_one_shot,
)
from .reporting import ResultsTable, emit_report, helpfulness_table, score_table
from .templates import (
    InstructionKind,
    PatternKind,
    PromptPattern,
    ShotMode,
    TaskInstruction,
    template_catalog,
)

__version__ = "0.1.0"
