import argparse
from typing import Any

import pytest
from examples import cmd_bare, cmd_example_run

from cascadebess.command import (
    Command,
    Option,
    build_parser,
    is_list_type,
    strip_optional,
    type_name,
)
from cascadebess.constants import EMPTY

command = Command(cmd_example_run)


def test_name():
    assert command.name == "example-run"
    assert Command(cmd_bare).name == "bare"


def test_options_len():
    assert len(command.options) == 6


def test_get_option():
    assert command.get_option(0).name == "config"
    assert command.get_option(1).name == "n_p"
    assert command.get_option("out").name == "out"
    with pytest.raises(IndexError):
        command.get_option(6)
    with pytest.raises(TypeError):
        command.get_option(3.3)
    with pytest.raises(KeyError):
        command.get_option("seed")


def test_descriptions():
    assert command.description == "Example command docstring."
    assert command.get_option("n_p").description == "Prediction horizon."
    assert command.get_option("out").description == "Output directory."
    assert Command(cmd_bare).description == ""


def test_option_properties():
    assert command.get_option("config").is_required
    assert not command.get_option("out").is_required
    assert command.get_option("n_p").flag == "--n-p"
    assert command.get_option("verbose").is_flag
    assert command.get_option("mode").choices == ("fast", "exact")
    assert command.get_option("n_p").choices is None


def test_type_inference():
    bare = Command(cmd_bare)
    assert bare.get_option("x").type is str
    assert bare.get_option("x").default is EMPTY
    assert bare.get_option("y").type is float
    assert Option("z", default=3).type is int


def test_argparse_kwargs():
    kwargs = command.get_option("sigma").argparse_kwargs()
    assert kwargs["nargs"] == "*"
    assert kwargs["type"] is float
    assert kwargs["default"] == [0.1, 0.2]
    assert kwargs["help"] == "Noise levels. (default: 0.1 0.2)"
    assert command.get_option("config").argparse_kwargs()["required"] is True
    assert command.get_option("verbose").argparse_kwargs()["action"] is argparse.BooleanOptionalAction
    assert command.get_option("out").argparse_kwargs()["help"] == "Output directory."


def test_parse_and_call():
    parser = build_parser([command, Command(cmd_bare)], prog="test")
    args = parser.parse_args(["example-run", "--config", "a.cfg"])
    assert args.command is command
    assert args.log_level == "INFO"
    assert args.command.call(args) == 98

    args = parser.parse_args(
        ["--log-level", "DEBUG", "example-run", "--config", "a.cfg", "--n-p", "8", "--sigma", "0.5", "--mode", "exact", "--verbose"]
    )
    assert args.log_level == "DEBUG"
    assert args.command.call(args) == 8 + 1 + 100 + 1000


def test_parse_errors():
    parser = build_parser([command], prog="test")
    with pytest.raises(SystemExit):
        parser.parse_args(["example-run"])
    with pytest.raises(SystemExit):
        parser.parse_args(["example-run", "--config", "a", "--mode", "slow"])
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_as_str():
    text = command.as_str(color=False, ljust=0)
    assert text.startswith("example-run(--config: str, --n-p: int = 96, --sigma: tuple[float, ...] = 0.1 0.2")
    assert text.endswith(" # Example command docstring.")
    assert command.get_option("out").as_str(color=False) == "--out: str | None = None"


def test_dict():
    assert command.dict["name"] == "example-run"
    assert command.dict["options"][1] == {"name": "n_p", "type": int, "default": 96, "description": "Prediction horizon."}


def test_typing_helpers():
    assert type_name(int) == "int"
    assert type_name(list[float]) == "list[float]"
    assert strip_optional(int | None) is int
    assert strip_optional(str) is str
    assert is_list_type(tuple[int, ...])
    assert is_list_type(list[str] | None)
    assert not is_list_type(str)


def test_annotations_resolve_to_builtins():
    assert Option.argparse_kwargs.__annotations__["return"] == dict[str, Any]
    assert Command.get_option.__annotations__["return"] is Option


def test_cli_imports():
    from cascadebess import cli

    assert all(isinstance(i, Command) for i in cli.COMMANDS)
