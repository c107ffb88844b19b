"""Schema-based configuration.

Parameter sets (data-generating coefficients, command line run settings) are
declared as :class:`Config` subclasses using :func:`option` and
:func:`option_list`, and can be loaded from JSON or TOML files.
"""
import json
import logging
import os
from typing import (
    Any,
    Callable,
    List,
    Mapping,
    TextIO,
    Type,
    TypeVar,
    Union,
)

import attr
from schematics import Model, types
import schematics.exceptions
import toml


_LOG = logging.getLogger(__name__)

_METADATA_KEY = 'gtiming_config'


class Config(Model):
    """Base class for configuration schemas.

    Unknown keys are rejected when data is structured into a schema.

    >>> class MyConfig(Config):
    ...     reps = option(int, default=200, help="Number of simulated data sets")
    ...     taus = option_list(float, help="Evaluation times")
    """
    def __repr__(self):
        return f"{self.__class__.__name__}({', '.join(f'{a.name}={repr(a.value)}' for a in self.atoms())})"


#: Raised when configuration fails to validate
ConfigError = schematics.exceptions.DataError

_T = TypeVar("_T")
# Mapping of Python types to Schematics field types
_TYPE_MAP = {
    str: types.StringType,
    int: types.IntType,
    float: types.FloatType,
    bool: types.BooleanType,
}
_DefaultArg = Union[None, _T, Callable[[], _T]]


class _Default:
    """Callable returning the value of the first environment variable in *env* that exists, or else *default*.

    *default* may itself be a callable (e.g. ``list``) to avoid sharing mutable values.
    """
    def __init__(self, default: _DefaultArg = None, env: List[str] = None):
        self._default = default if callable(default) else lambda: default
        self._env = env or []

    def __call__(self):
        for var in self._env:
            if var in os.environ:
                return os.environ[var]
        return self._default()


@attr.s(frozen=True)
class _OptionMetadata:
    type: type = attr.ib()
    help: str = attr.ib(default="", validator=attr.validators.instance_of(str))


def option(cls: Type[_T], *,
           required: bool = None,
           default: _DefaultArg = None,
           env: Union[str, List[str]] = None,
           min_value=None,
           max_value=None,
           choices=None,
           help: str):
    """Create a configuration option that contains a value of type *cls*.

    :param cls:         Option type (one of ``str``, ``int``, ``float``, ``bool``)
    :param required:    A non-None value is required? (default: False if default is None, otherwise True)
    :param default:     Default value if no value is supplied (default: None)
    :param env:         Environment variables to try if no value is supplied, before using default
    :param min_value:   Inclusive lower bound for numeric options
    :param max_value:   Inclusive upper bound for numeric options
    :param choices:     Allowed values
    :param help:        Description of option
    """
    if cls not in _TYPE_MAP:
        raise TypeError(f"cls must be one of {list(_TYPE_MAP)}")
    if required is None:
        required = default is not None
    if isinstance(env, str):
        env = [env]

    field_kwargs = {
        "required": required,
        "default": _Default(default, env),
        "choices": choices,
        "metadata": {_METADATA_KEY: _OptionMetadata(type=cls, help=help)},
    }
    if min_value is not None:
        field_kwargs["min_value"] = min_value
    if max_value is not None:
        field_kwargs["max_value"] = max_value
    return _TYPE_MAP[cls](**field_kwargs)


def option_list(cls: Type[_T], *,
                default: _DefaultArg = None,
                size: int = None,
                min_value=None,
                max_value=None,
                validators: List[Callable] = None,
                help: str):
    """Create a configuration option that contains a list of *cls* values.

    :param cls:         Item type
    :param default:     Default value if no value is supplied (default: empty list)
    :param size:        Exact number of items required, if any
    :param min_value:   Inclusive lower bound for each numeric item
    :param max_value:   Inclusive upper bound for each numeric item
    :param validators:  Extra schematics validators applied to the whole list
    :param help:        Description of option
    """
    if cls not in _TYPE_MAP:
        raise TypeError(f"cls must be one of {list(_TYPE_MAP)}")
    if default is None:
        default = list
    item_kwargs = {"required": True}
    if min_value is not None:
        item_kwargs["min_value"] = min_value
    if max_value is not None:
        item_kwargs["max_value"] = max_value
    return types.ListType(
        _TYPE_MAP[cls](**item_kwargs),
        min_size=size,
        max_size=size,
        validators=validators or [],
        required=True,      # Disallow None as a value, empty list is fine
        default=_Default(default),
        metadata={_METADATA_KEY: _OptionMetadata(type=cls, help=help)},
    )


def describe(cls: Type[Config]) -> Mapping[str, str]:
    """Get the help text of each option in *cls*."""
    return {name: field.metadata[_METADATA_KEY].help
            for name, field in cls.fields.items()
            if _METADATA_KEY in field.metadata}


def structure(data: Mapping[str, Any], cls: Type[Config]) -> Config:
    """Create an instance of *cls* from plain Python structure *data*."""
    o = cls(data)
    o.validate()
    return o


def unstructure(obj: Config) -> Mapping[str, Any]:
    """Get plain Python structured data from *obj*."""
    return obj.to_native()


def _format_of(path: str, config_format: str = None) -> str:
    if config_format:
        return config_format
    _, ext = os.path.splitext(path)
    if ext.lower() == ".json":
        return "json"
    elif ext.lower() == ".toml":
        return "toml"
    raise ValueError(f'config file extension not in {{".json", ".toml"}}: {path}')


def load_data(f: TextIO, config_format: str = None) -> Mapping[str, Any]:
    """Read plain data from JSON or TOML file *f*, using the file extension if *config_format* isn't given."""
    config_format = _format_of(getattr(f, 'name', ''), config_format)
    _LOG.debug("Reading configuration as %s", config_format.upper())
    if config_format == "json":
        return json.load(f)
    else:
        return toml.load(f)


def load(f: TextIO, cls: Type[Config], config_format: str = None) -> Config:
    """Create an instance of *cls* from the JSON or TOML in *f*."""
    return structure(load_data(f, config_format), cls)


def dump(obj: Config, f: TextIO, config_format: str = None):
    """Write JSON or TOML representation of *obj* to *f*."""
    data = unstructure(obj)
    if _format_of(getattr(f, 'name', ''), config_format) == "json":
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    else:
        toml.dump(data, f)
