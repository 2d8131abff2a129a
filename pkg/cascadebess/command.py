import argparse
import builtins
import inspect
import types
import typing
from dataclasses import dataclass
from typing import Any, Callable

import docstring_parser
import typing_extensions
from docstring_parser import Docstring
from stdl.st import ForegroundColor, TextStyle, ansi_ljust, colored, with_style

from cascadebess.constants import EMPTY

UNION_TYPES = [typing._UnionGenericAlias, types.UnionType]  # type:ignore
COMMAND_PREFIX = "cmd_"


def type_name(t: Any) -> str:
    """
    Convert a Python type to its string representation (without the module name).

    Example:
        ```python
        >>> type_name(int)
        'int'
        >>> type_name(list[float])
        'list[float]'
        ```
    """
    type_str = repr(t)
    if "<class '" in type_str:
        return type_str.split("'")[1].split(".")[-1]
    return type_str.replace("typing_extensions.", "").replace("typing.", "")


def is_union_type(t) -> bool:
    return type(t) in UNION_TYPES


def is_direct_literal(t: Any) -> bool:
    if t is typing_extensions.Literal:
        return False
    return getattr(t, "__origin__", None) is typing_extensions.Literal


def strip_optional(t: Any) -> Any:
    """
    Remove `None` from a union type.

    Example:
        ```python
        >>> strip_optional(int | None)
        <class 'int'>
        ```
    """
    if not is_union_type(t):
        return t
    args = [i for i in typing.get_args(t) if i is not types.NoneType]
    if len(args) == 1:
        return args[0]
    return typing.Union[tuple(args)]  # type:ignore


def is_list_type(t: Any) -> bool:
    return typing.get_origin(strip_optional(t)) in (list, tuple)


def element_type(t: Any) -> Any:
    """The type of a single value of `t` (the item type for list annotations)."""
    t = strip_optional(t)
    if is_list_type(t):
        args = typing.get_args(t)
        return args[0] if args else str
    return t


def colored_type(t: Any, style: TextStyle) -> str:
    text = type_name(t)
    parts, part = [], []
    for char in text:
        if char in "[](){}|,? ":
            parts.append(with_style("".join(part), style))
            part.clear()
            parts.append(char)
        else:
            part.append(char)
    parts.append(with_style("".join(part), style))
    return "".join(parts)


@dataclass
class OptionStrTheme:
    name: ForegroundColor = "light_blue"
    type: ForegroundColor = "green"
    default: ForegroundColor = "blue"


class Option:
    """
    A command-line option generated from a command function parameter.

    Args:
        name (str): Parameter name. The flag is `--name` with underscores as dashes.
        type (Any): Annotation of the parameter.
        default (Any): Default value. Options without one are required.
        description (str | None): Help text, usually parsed from the docstring.
    """

    def __init__(
        self,
        name: str,
        type: Any = EMPTY,
        default: Any = EMPTY,
        description: str | None = None,
    ) -> None:
        self.name = name
        self.type = type
        self.default = default
        self.description = description
        if self.type is EMPTY:
            self.type = str if self.default in (EMPTY, None) else builtins.type(self.default)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name='{self.name}', type={type_name(self.type)}, default={self.default}, description='{self.description}')"

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    @property
    def is_required(self) -> bool:
        return self.default is EMPTY

    @property
    def is_flag(self) -> bool:
        return strip_optional(self.type) is bool

    @property
    def choices(self) -> tuple | None:
        t = element_type(self.type)
        return typing.get_args(t) if is_direct_literal(t) else None

    def argparse_kwargs(self) -> dict[str, Any]:
        """Keyword arguments for `ArgumentParser.add_argument`."""
        kwargs: dict[str, Any] = {"dest": self.name, "help": self.description or ""}
        if self.is_flag:
            kwargs["action"] = argparse.BooleanOptionalAction
            kwargs["default"] = bool(self.default) if not self.is_required else False
            return kwargs
        t = element_type(self.type)
        if choices := self.choices:
            kwargs["choices"] = choices
            t = type(choices[0])
        kwargs["type"] = t if t in (int, float, str) else str
        if is_list_type(self.type):
            kwargs["nargs"] = "*" if not self.is_required else "+"
        if self.is_required:
            kwargs["required"] = True
        else:
            kwargs["default"] = list(self.default) if isinstance(self.default, tuple) else self.default
            if self.default is not None:
                kwargs["help"] += f" (default: {self.default_str})"
        kwargs["metavar"] = self.name.upper()
        return kwargs

    @property
    def default_str(self) -> str:
        if isinstance(self.default, (list, tuple)):
            return " ".join(str(i) for i in self.default) or "none"
        return str(self.default)

    def as_str(self, *, color: bool = True, theme: OptionStrTheme | None = None) -> str:
        """
        Return a string representation of the option, e.g. `--out: str = reports`.

        Args:
            color (bool, optional): Whether to colorize the output.
            theme (OptionStrTheme, optional): Color theme to use. Default will be used if None.
        """
        if theme is None:
            theme = OptionStrTheme()
        name_str = self.flag if not color else colored(self.flag, theme.name)
        type_str = colored_type(self.type, TextStyle(theme.type)) if color else type_name(self.type)
        string = f"{name_str}: {type_str}"
        if not self.is_required:
            default_str = colored(self.default_str, theme.default) if color else self.default_str
            string += f" = {default_str}"
        return string

    @classmethod
    def from_inspect_param(cls, param: inspect.Parameter, description: str | None = None):
        return cls(
            name=param.name,
            type=param.annotation,
            default=param.default,
            description=description,
        )

    # last in the class body, the name shadows the builtin for later annotations
    @property
    def dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "type": self.type,
            "default": self.default,
            "description": self.description,
        }


def _get_docstr_desc(docstring: Docstring | None) -> str:
    if docstring is None:
        return ""
    if docstring.short_description:
        return docstring.short_description
    if docstring.long_description:
        return docstring.long_description
    return ""


@dataclass
class CommandStrTheme:
    name: ForegroundColor = "yellow"
    bracket: ForegroundColor = "white"
    description: ForegroundColor = "gray"


class Command:
    """
    A CLI sub-command generated from a plain function.

    The command name is the function name without the `cmd_` prefix and with dashes for
    underscores. Every parameter becomes an option whose help text is taken from the
    `Args:` section of the function's docstring.

    Args:
        func (Callable): The command function. It returns the process exit code.

    Attributes:
        name (str): Command name as typed on the command line.
        description (str): First paragraph of the docstring.
        options (list[Option]): One option per parameter.
    """

    def __init__(self, func: Callable[..., int]) -> None:
        self.func = func
        name = func.__name__
        if name.startswith(COMMAND_PREFIX):
            name = name[len(COMMAND_PREFIX) :]
        self.name = name.replace("_", "-")
        self.docstring = inspect.getdoc(func)
        self._parsed_docstr: Docstring | None = (
            docstring_parser.parse(self.docstring) if self.docstring else None
        )
        self.description = _get_docstr_desc(self._parsed_docstr)
        self._options = self._get_options()

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name='{self.name}', options={len(self._options)}, description='{self.description}')"

    def _get_options(self) -> dict[str, Option]:
        signature = inspect.signature(self.func)
        descriptions = {}
        if self._parsed_docstr is not None:
            descriptions = {i.arg_name: i.description for i in self._parsed_docstr.params}
        return {
            name: Option.from_inspect_param(param, descriptions.get(name))
            for name, param in signature.parameters.items()
        }

    @property
    def options(self) -> list[Option]:
        return list(self._options.values())

    def get_option(self, arg: str | int) -> Option:
        """
        Retrieve a single option by parameter name or position.

        Raises:
            TypeError: If arg is not a string or an integer.
        """
        match arg:
            case str():
                return self._options[arg]
            case int():
                return self.options[arg]
            case _:
                raise TypeError(type(arg))

    def add_parser(self, subparsers) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(
            self.name,
            help=self.description,
            description=self.docstring.split("\n\n")[0] if self.docstring else None,
        )
        for option in self.options:
            parser.add_argument(option.flag, **option.argparse_kwargs())
        parser.set_defaults(command=self)
        return parser

    def call(self, namespace: argparse.Namespace) -> int:
        """Call the command function with the options parsed into `namespace`."""
        return self.func(**{i.name: getattr(namespace, i.name) for i in self.options})

    def as_str(
        self,
        *,
        color: bool = True,
        description: bool = True,
        ljust: int = 58,
        theme: CommandStrTheme | None = None,
    ) -> str:
        """
        Return a one-line representation: name, options and description.

        Args:
            color (bool, optional): Whether to colorize the string.
            description (bool, optional): Whether to include the description of the command.
            ljust (int, optional): The width of the string.
            theme (CommandStrTheme, optional): Color theme to use. Default will be used if None.
        """
        if theme is None:
            theme = CommandStrTheme()
        name_str = self.name if not color else colored(self.name, theme.name)
        options = ", ".join(i.as_str(color=color) for i in self.options)
        if color:
            options = colored("(", theme.bracket) + options + colored(")", theme.bracket)
        else:
            options = f"({options})"
        string = f"{name_str}{options}"
        if description and self.description:
            string = ansi_ljust(string, ljust)
            description_str = f" # {self.description}"
            if color:
                description_str = colored(description_str, theme.description)
            return string + description_str
        return string

    @property
    def dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "options": [i.dict for i in self.options],
            "docstring": self.docstring,
        }


def build_parser(commands: list[Command], prog: str, description: str = "") -> argparse.ArgumentParser:
    """Create an argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(
        prog=prog,
        description=description,
        epilog="commands:\n" + "\n".join("  " + i.as_str(color=False, ljust=0) for i in commands),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level (default: INFO)",
    )
    subparsers = parser.add_subparsers(dest="command_name", required=True)
    for command in commands:
        command.add_parser(subparsers)
    return parser


__all__ = ["Option", "Command", "build_parser", "type_name", "strip_optional", "is_list_type"]
