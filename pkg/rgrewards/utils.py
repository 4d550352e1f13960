import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from inspect import signature, Parameter
from typing import Callable, Iterable, Iterator, List, Tuple, Type, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def get_class_parameters(cls: Type) -> Iterator[str]:
    """
    Get an iterator over all arguments that can be used to construct a class.

    This works for class hierarchies that have compatible constructors.

    Args:
        cls: class to inspect constructor parameters in class hierarchy for

    Returns:
        Iterator over parameter names
    """
    return itertools.chain(
        *(get_class_parameters(cls) for cls in cls.__bases__),
        (
            name
            for name, param in signature(cls).parameters.items()
            if param.kind is not Parameter.VAR_POSITIONAL
            and param.kind is not Parameter.VAR_KEYWORD
        )
    )


def parameters_attr(cls: Type) -> Type:
    """Add a parameters attribute to the class with all arguments that can be used to construct it.

    Config files are checked against this attribute, so it has to be
    available on the class and not only on instances.

    Args:
        cls: class to add parameters attribute to

    Returns:
        cls: modified class
    """
    cls.parameters = list(dict.fromkeys(get_class_parameters(cls)))
    return cls


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration mapping."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], jobs: int = 1, chunksize: int = 16
) -> List[R]:
    """Map ``func`` over ``items``, in worker processes if ``jobs > 1``.

    Results always come back in input order, whatever order the workers
    finish in. ``func`` has to be picklable for ``jobs > 1``.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(func, items, chunksize=chunksize))


def read_jsonl(path) -> Iterator[Tuple[int, str]]:
    """Yield ``(line_number, text)`` for the non-blank lines of a JSONL file."""
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip():
                yield line_number, line
