"""Exception hierarchy shared by every stage of the analysis."""


class AnalysisError(Exception):
    """Base class for all errors raised by surgerr."""

    stage = "analysis"


# -- ingest ---------------------------------------------------------------


class ParseError(AnalysisError):
    stage = "ingest"


class MalformedRow(ParseError):
    def __init__(self, line: int, count: int, detail: str = ""):
        self.line = line
        self.count = count
        msg = f"line {line}: expected 76 numeric tokens, got {count}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptyFile(ParseError):
    pass


class OverlapError(ParseError):
    pass


class OrderError(ParseError):
    pass


class NoStartError(ParseError):
    pass


class RubricViolation(AnalysisError):
    stage = "ingest"


class RangeError(AnalysisError):
    stage = "ingest"


class MismatchedInstance(AnalysisError):
    stage = "ingest"


class UnsupportedCount(AnalysisError):
    stage = "ingest"


# -- segmentation ---------------------------------------------------------


class RangeExceedsTrial(AnalysisError):
    stage = "segmentation"

    def __init__(self, trial_id: str, entry, n_frames: int):
        self.trial_id = trial_id
        self.entry = entry
        self.n_frames = n_frames
        super().__init__(
            f"{trial_id}: transcript entry {entry.start_frame}-{entry.end_frame} "
            f"{entry.gesture} exceeds trial length {n_frames}"
        )


class MissingAnnotation(AnalysisError):
    stage = "segmentation"

    def __init__(self, trial_id: str, index: int):
        self.trial_id = trial_id
        self.index = index
        super().__init__(f"no error annotation for {trial_id} gesture #{index}")


class AnnotationMismatch(AnalysisError):
    stage = "segmentation"


# -- alignment / divergence / trajectory ----------------------------------


class DimensionMismatch(AnalysisError):
    stage = "alignment"


class EmptySeries(AnalysisError):
    stage = "alignment"


class InsufficientExamples(AnalysisError):
    stage = "alignment"


class DegenerateSigma(AnalysisError):
    stage = "divergence"


class EmptySamples(AnalysisError):
    stage = "divergence"


class InsufficientSamples(AnalysisError):
    stage = "divergence"


class TooShort(AnalysisError):
    stage = "trajectory"


class TooFewPoints(AnalysisError):
    stage = "trajectory"


class NonConvergence(UserWarning):
    """Fuzzy c-means hit max_iterations; the final state is still returned."""


# -- procedural / statistics ----------------------------------------------


class EmptyTranscript(AnalysisError):
    stage = "procedural"


class MissingSkillRecord(AnalysisError):
    stage = "statistics"

    def __init__(self, trial_id: str):
        self.trial_id = trial_id
        super().__init__(f"no skill record for trial {trial_id}")


class TooFewSamples(AnalysisError):
    stage = "statistics"


class ConstantInput(AnalysisError):
    stage = "statistics"


class LengthMismatch(AnalysisError):
    stage = "statistics"


# -- orchestration --------------------------------------------------------


class SpecError(AnalysisError):
    stage = "synthgen"


class ManifestError(AnalysisError):
    stage = "manifest"
