from typing import List, Optional

from jinja2 import Template


class FeedbackComponent:
    def __init__(self, message: str, kwargs: dict = None):
        self.message = message
        self.kwargs = kwargs or {}

    def render(self) -> str:
        return Template(self.message).render(self.kwargs)

    def __repr__(self):
        return "<{} {}>".format(self.__class__.__name__, repr(vars(self)))


class Feedback:
    """Message explaining why an input could not be scored.

    The conclusion says what is wrong; context components say where
    (which file, which line, which report). Context is rendered first,
    outermost context first.
    """

    def __init__(
        self,
        conclusion: FeedbackComponent,
        context_components: Optional[List[FeedbackComponent]] = None,
    ):
        self.conclusion = conclusion
        self.context_components = context_components or []

    def add_context(self, component: FeedbackComponent):
        self.context_components.insert(0, component)

    @property
    def location(self) -> dict:
        location = {}
        for component in [*self.context_components, self.conclusion]:
            if component is None:
                continue
            for key in ("path", "line", "report_id"):
                if key in component.kwargs:
                    location[key] = component.kwargs[key]
        return location

    def get_message(self) -> str:
        msgs = [*(c for c in self.context_components if c is not None), self.conclusion]
        return "".join(msg.render() for msg in msgs if msg.message)

    def __repr__(self):
        return "<{} {}>".format(self.__class__.__name__, repr(vars(self)))
