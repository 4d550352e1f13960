from contextlib import contextmanager
from typing import Iterator

from rgrewards.Feedback import Feedback, FeedbackComponent


class Failure(Exception):
    """Base class for every input problem the command line reports.

    ``exit_code`` is part of the command line contract:
    0 ok, 1 runtime, 2 alignment, 3 parse, 4 usage.
    """

    exit_code = 1

    def __init__(self, feedback: Feedback):
        if not isinstance(feedback, Feedback):
            raise ValueError("Use the from_message method")
        super().__init__(feedback)
        self.feedback = feedback

    def __str__(self):
        return self.feedback.get_message()

    @classmethod
    def from_message(cls, message: str, /, **kwargs) -> "Failure":
        return cls(Feedback(FeedbackComponent(message, kwargs)))


class TrainingFailure(Failure):
    exit_code = 1


class AlignmentFailure(Failure):
    exit_code = 2


class ParseFailure(Failure):
    exit_code = 3


class UsageFailure(Failure):
    exit_code = 4


@contextmanager
def failure_context(message: str, **kwargs) -> Iterator[None]:
    """Prefix failures raised inside the block with where they happened.

    :Example:

        with failure_context("In `{{ path }}` line {{ line }}: ", path=path, line=3):
            parse_report_annotation(raw)
    """
    try:
        yield
    except Failure as failure:
        failure.feedback.add_context(FeedbackComponent(message, kwargs))
        raise
