import io
import math
import os

import pytest

from . import TempEnvVars
from gtiming import config, dgp


def test_config_option_default():
    class Config(config.Config):
        # Implicit default=None
        a = config.option(int, help="")
        # Default of correct type
        b = config.option(int, default=1, help="")
        # Default is function returning correct type
        c = config.option(int, default=lambda: 2, help="")

    c = config.structure({}, Config)
    assert c.a is None
    assert c.b == 1
    assert c.c == 2

    class BadDefault(config.Config):
        a = config.option(int, default="blah", help="")
        b = config.option(int, default=lambda: "blah", help="")

    with pytest.raises(config.ConfigError):
        # Set b, so only a's default is tested
        config.structure({"b": 3}, BadDefault)

    with pytest.raises(config.ConfigError):
        # Set a, so only b's default is tested
        config.structure({"a": 3}, BadDefault)


def test_config_option_validate():
    class Config(config.Config):
        # Option with default=None (or omitted) can be None
        a = config.option(int, help="")
        # Option without default=None must not be None
        b = config.option(int, default=1, help="")
        c = config.option(float, default=0.5, min_value=0.0, max_value=1.0, help="")
        d = config.option(str, default="x", choices=["x", "y"], help="")

    c1 = config.structure({"a": 3, "b": 4}, Config)
    assert c1.a == 3
    assert c1.b == 4

    # None value where default=None is allowed
    assert config.structure({"a": None}, Config).a is None

    # (But incorrect type is not allowed)
    with pytest.raises(config.ConfigError):
        config.structure({"a": "blah"}, Config)

    # None value where default!=None is not allowed
    with pytest.raises(config.ConfigError):
        config.structure({"b": None}, Config)

    with pytest.raises(config.ConfigError):
        config.structure({"c": 1.5}, Config)
    with pytest.raises(config.ConfigError):
        config.structure({"d": "z"}, Config)


def test_config_rejects_unknown_keys():
    class Config(config.Config):
        a = config.option(int, help="")

    with pytest.raises(config.ConfigError):
        config.structure({"b": 1}, Config)


def test_config_option_env():
    class Config(config.Config):
        a = config.option(str, env=["A_PRIMARY", "A_FALLBACK"], help="")
        b = config.option(int, env=["B_ENV"], help="")
        c = config.option(bool, env="C_ENV", help="")

    c1 = config.structure({}, Config)
    assert c1.a is None
    assert c1.b is None

    # Environment variable precedence
    with TempEnvVars({"A_PRIMARY": "foo", "A_FALLBACK": "bar"}):
        assert config.structure({}, Config).a == "foo"
    with TempEnvVars({"A_FALLBACK": "bar"}):
        assert config.structure({}, Config).a == "bar"

    # Type conversion: int
    with TempEnvVars({"B_ENV": "2"}):
        assert config.structure({}, Config).b == 2

    # Type conversion: bool
    with TempEnvVars({"C_ENV": "true"}):
        assert config.structure({}, Config).c is True
    with TempEnvVars({"C_ENV": "false"}):
        assert config.structure({}, Config).c is False

    # Supplied value causes environment variable to be ignored
    with TempEnvVars({"C_ENV": "false"}):
        assert config.structure({"c": True}, Config).c is True


def test_config_option_types():
    """Check that only whitelisted types are allowed for options."""
    class B:
        pass

    for t in (str, int, float, bool):
        config.option(t, help="")
        config.option_list(t, help="")

    for t in (B, None, object, list):
        with pytest.raises(TypeError):
            config.option(t, help="")
        with pytest.raises(TypeError):
            config.option_list(t, help="")


def test_config_option_list():
    class Config(config.Config):
        a = config.option_list(float, help="")
        b = config.option_list(int, default=lambda: [1, 2], size=2, help="")

    c = config.structure({}, Config)
    assert c.a == []
    assert c.b == [1, 2]
    # Defaults are not shared between instances
    c.a.append(1.0)
    assert config.structure({}, Config).a == []

    with pytest.raises(config.ConfigError):
        config.structure({"b": [1, 2, 3]}, Config)
    with pytest.raises(config.ConfigError):
        config.structure({"a": None}, Config)


def test_describe():
    described = config.describe(dgp.DgpParams)
    assert described["p_l1"] == "P(L1 = 1)"
    assert set(described) == set(dgp.DgpParams.fields)


@pytest.mark.parametrize('config_format', ['json', 'toml'])
def test_dump_and_load(config_format):
    params = dgp.default_params().evolve(p_l1=0.25, rate_t2=[-2.0, 0.5, 0.5, -1.0])
    f = io.StringIO()
    config.dump(params, f, config_format)
    f.seek(0)
    loaded = config.load(f, dgp.DgpParams, config_format)
    assert config.unstructure(loaded) == config.unstructure(params)


def test_load_by_extension(tmp_path):
    path = tmp_path / 'params.toml'
    path.write_text('p_l1 = 0.75\nbeta_a1 = [0.5, -0.5]\n')
    with open(path) as f:
        params = config.load(f, dgp.DgpParams)
    assert params.p_l1 == 0.75
    assert params.beta_a1 == [0.5, -0.5]
    assert params.rate_t1 == [-3.0, -1.0, 1.0]

    with pytest.raises(ValueError):
        config._format_of(str(tmp_path / "params.yaml"))


@pytest.mark.parametrize('data', [
    {'p_l1': 1.5},
    {'beta_a1': [1.0]},
    {'rate_t2': [-3.0, 1.0, 1.0]},
    {'rate_c1': [-4.0, math.inf, 1.0]},
    {'censoring': True},
])
def test_dgp_params_rejected(data):
    with pytest.raises(config.ConfigError):
        config.structure(data, dgp.DgpParams)


def test_committed_default_params():
    path = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'params.default.toml')
    with open(path) as f:
        params = config.load(f, dgp.DgpParams)
    assert config.unstructure(params) == config.unstructure(dgp.default_params())


def test_config_option_list_item_bounds():
    class Config(config.Config):
        a = config.option_list(float, min_value=0.0, max_value=1.0, help="")

    assert config.structure({"a": [0.0, 0.5, 1.0]}, Config).a == [0.0, 0.5, 1.0]
    for bad in ([-0.5], [0.5, 1.5]):
        with pytest.raises(config.ConfigError):
            config.structure({"a": bad}, Config)
