import importlib.util
import os

from gtiming.cohort import CohortDataset, SecondCourse, SubjectRecord


class TempEnvVars(object):
    """A context manager for temporarily changing the values of environment
    variables."""
    def __init__(self, changes):
        self.changes = changes
        self.restore = {}

    def __enter__(self):
        for k, v in self.changes.items():
            if k in os.environ:
                self.restore[k] = os.environ[k]
            os.environ[k] = v
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        for k, v in self.changes.items():
            if k in self.restore:
                os.environ[k] = self.restore[k]
            else:
                del os.environ[k]


def fixture_file(*path):
    """Get the path to a fixture file."""
    return os.path.join(os.path.dirname(__file__), 'fixtures', *path)


def subject(id, l1=0, a1=1, w1=1.0, delta1=0, course2=None):
    """Build a :class:`SubjectRecord`; *course2* is an ``(l2, a2, w2, delta2)`` tuple."""
    if course2 is not None:
        course2 = SecondCourse(*course2)
    return SubjectRecord(id, l1, a1, w1, delta1, course2)


def cohort(*subjects):
    return CohortDataset.from_records(subjects)


def load_script(name):
    """Import ``scripts/<name>.py`` as a module."""
    path = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'scripts', f'{name}.py')
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module
