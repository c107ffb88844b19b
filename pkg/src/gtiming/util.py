from contextlib import contextmanager
import logging
import os
import tempfile
import typing

import attr
import numpy as np


LOG = logging.getLogger(__name__)


def type_validator(_obj, attrib: attr.Attribute, value):
    """An attrs validator that inspects the attribute type."""
    if attrib.type is None:
        raise TypeError(f"'{attrib.name}' has no type to check")
    elif getattr(attrib.type, "__origin__", None) is typing.Union:
        if any(isinstance(value, t) for t in attrib.type.__args__):
            return True
    elif isinstance(value, attrib.type):
        return True
    raise TypeError(f"'{attrib.name}' must be {attrib.type} (got {value!r} that is a {type(value)})",
                    attrib, value)


def binary_validator(_obj, attrib: attr.Attribute, value):
    """An attrs validator for 0/1 indicator fields."""
    if value not in (0, 1):
        raise ValueError(f"'{attrib.name}' must be 0 or 1 (got {value!r})")


def positive_validator(_obj, attrib: attr.Attribute, value):
    if not value > 0:
        raise ValueError(f"'{attrib.name}' must be positive (got {value!r})")


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Get the random stream for replicate *index* of a run seeded with *seed*.

    The stream depends only on ``(seed, index)``, so replicates can be run in any
    order or on any number of threads.

    >>> float(replicate_rng(1, 3).random()) == float(replicate_rng(1, 3).random())
    True
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


@contextmanager
def atomic_write(path, mode='w', **kwargs):
    """Open a temporary file next to *path*, and rename it over *path* only if the block succeeds."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.' + os.path.basename(path) + '.', suffix='.tmp')
    try:
        with open(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    LOG.debug('wrote %s', path)


class PrettyStreamHandler(logging.StreamHandler):
    """A :class:`logging.StreamHandler` that colours each message by severity.

    *colour* forces colour on or off; by default it is used when the stream is a TTY.
    """
    #: ANSI colour per logging level.
    COLOURS = {
        logging.DEBUG: '\033[36m',
        logging.WARNING: '\033[33m',
        logging.ERROR: '\033[31m',
        logging.CRITICAL: '\033[31;7m',
    }
    COLOUR_END = '\033[0m'

    def __init__(self, stream=None, colour=None):
        super().__init__(stream)
        self.colour = self.stream.isatty() if colour is None else colour

    def format(self, record):
        msg = super().format(record)
        colour = self.COLOURS.get(record.levelno) if self.colour else None
        return f'{colour}{msg}{self.COLOUR_END}' if colour else msg
