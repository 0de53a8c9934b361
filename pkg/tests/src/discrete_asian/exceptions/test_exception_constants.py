from pathlib import Path

import pytest

import discrete_asian
from discrete_asian.exceptions import exception_constants

PACKAGE_ROOT = Path(discrete_asian.__file__).parent
MESSAGES = sorted(
    name
    for name, value in vars(exception_constants).items()
    if name.isupper() and isinstance(value, str)
)


def _sources_outside_constants() -> str:
    own = Path(exception_constants.__file__).resolve()
    return "\n".join(
        path.read_text(encoding="utf-8")
        for path in PACKAGE_ROOT.rglob("*.py")
        if path.resolve() != own
    )


def test_messages_are_unique():
    values = [getattr(exception_constants, name) for name in MESSAGES]
    assert len(set(values)) == len(values)


@pytest.mark.parametrize("name", MESSAGES)
def test_every_message_is_raised_somewhere(name):
    assert name in _sources_outside_constants()
