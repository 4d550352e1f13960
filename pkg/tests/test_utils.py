import pytest

from rgrewards.utils import (
    config_hash,
    get_class_parameters,
    parallel_map,
    parameters_attr,
    read_jsonl,
)


def square(x):
    return x * x


def test_get_class_parameters():
    # Given
    class A:
        def __init__(self, a, b="c"):
            pass

    class B(A):
        def __init__(self, one, *args, two=2, **kwargs):
            super().__init__(*args, **kwargs)
            self.one = one
            self.two = two

    # When
    args_a = list(get_class_parameters(A))
    args_b = list(get_class_parameters(B))

    # Then
    assert args_a == ["a", "b"]
    assert args_b == ["a", "b", "one", "two"]


def test_parameters_attr():
    # Given
    class A:
        def __init__(self, a, b="c"):
            pass

    assert not hasattr(A, "parameters")

    # When
    A = parameters_attr(A)

    # Then
    assert A.parameters == ["a", "b"]


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


@pytest.mark.parametrize("jobs", [1, 2])
def test_parallel_map_keeps_order(jobs):
    assert parallel_map(square, range(50), jobs=jobs, chunksize=3) == [
        x * x for x in range(50)
    ]


def test_read_jsonl_skips_blank_lines(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"a": 1}\n\n  \n{"b": 2}\n')
    assert [n for n, _ in read_jsonl(path)] == [1, 4]
