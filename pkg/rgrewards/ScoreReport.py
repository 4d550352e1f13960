import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from rgrewards import __version__
from rgrewards.utils import config_hash


class ScoreReport:
    """Machine-readable result of one scoring command.

    Every metric is reported once, as a mapping of aggregate values.
    The metadata keeps the inputs and the resolved configuration, and a
    hash of that configuration so a run can be repeated exactly.

    :Example:

        report = ScoreReport("score-nlg", inputs={"hyp": "h.txt", "ref": "r.txt"})
        report.add_metric("bleu4", {"score": 0.7788})
        report.write("scores.json")
    """

    def __init__(
        self,
        command: str,
        inputs: Optional[Dict[str, str]] = None,
        config: Optional[Dict[str, Any]] = None,
        version: str = __version__,
    ):
        self.command = command
        self.inputs = dict(inputs or {})
        self.config = dict(config or {})
        self.version = version
        self.metrics = {}  # type: Dict[str, Dict[str, Any]]
        self.per_example = None  # type: Optional[List[Dict[str, Any]]]

    @property
    def config_hash(self) -> str:
        return config_hash({"command": self.command, **self.config})

    def add_metric(self, name: str, aggregate: Dict[str, Any]):
        if name in self.metrics:
            raise ValueError("Metric `{}` is already in the report".format(name))
        self.metrics[name] = aggregate

    def add_example(self, row: Dict[str, Any]):
        if self.per_example is None:
            self.per_example = []
        self.per_example.append(row)

    @property
    def metadata(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": self.version,
        }

    def build_payload(self) -> Dict[str, Any]:
        payload = {"metrics": self.metrics, "metadata": self.metadata}
        if self.per_example is not None:
            payload["per_example"] = self.per_example
        return payload

    @classmethod
    def from_payload(cls, payload: Dict[str, Any]) -> "ScoreReport":
        metadata = payload["metadata"]
        report = cls(
            metadata["command"],
            inputs=metadata.get("inputs"),
            config=metadata.get("config"),
            version=metadata.get("version", __version__),
        )
        for name, aggregate in payload["metrics"].items():
            report.add_metric(name, aggregate)
        for row in payload.get("per_example") or []:
            report.add_example(row)
        return report

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.build_payload(), indent=indent, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ScoreReport":
        return cls.from_payload(json.loads(text))

    def write(self, path: Union[str, Path]):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    def __eq__(self, other):
        return (
            isinstance(other, ScoreReport)
            and self.build_payload() == other.build_payload()
        )

    def __repr__(self):
        return "<{} {} {}>".format(
            self.__class__.__name__, self.command, sorted(self.metrics)
        )
