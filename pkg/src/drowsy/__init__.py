"""Eye-aspect-ratio drowsiness detection over timestamped landmark traces."""

__version__ = "0.1.0"

from .detector import (
    ClosureKind,
    Detector,
    DetectorConfig,
    DetectorState,
    Event,
    EventKind,
    EyeState,
    blink_rate,
    classify_closure,
    classify_eye_state,
    perclos,
    step,
)
from .errors import (
    DegenerateEye,
    DrowsyError,
    EmptyWindow,
    InvalidScript,
    MissingScenario,
    NonMonotonicTimestamp,
    ParseError,
    SchemaError,
    UnknownRow,
    ZeroTotal,
)
from .evaluation import (
    EvalReport,
    EventLog,
    correct_rate,
    match_alarms,
    reproduce_paper_table,
    run_detector_on_trace,
)
from .geometry import (
    EyeLandmarks,
    EyePair,
    FaceLandmarks68,
    Point2,
    compute_ear,
    euclidean_distance,
    extract_eyes,
    mean_ear,
)
from .ingestion import (
    FrameObservation,
    Trace,
    open_trace,
    parse_frame_record,
    serialize_frame_record,
    validate_trace,
)
from .synth import LabeledTrace, ScenarioScript, generate_trace, scenario_from_table_row
